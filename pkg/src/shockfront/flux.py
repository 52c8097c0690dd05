"""Convex fluxes, their piecewise-linear interpolants and Legendre conjugates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .piecewise import PiecewiseLinearFn

SAMPLE_POINTS = 2**12


class Flux:
    """Convex flux function ``f(u)``.

    Subclasses provide ``__call__``, ``derivative`` and the closed-form pieces
    they know about; sampling fallbacks cover the rest.
    """

    is_piecewise_linear = False

    def __call__(self, u: Any) -> Any:
        raise NotImplementedError

    def derivative(self, u: Any) -> Any:
        raise NotImplementedError

    def second_derivative(self, u: Any) -> Any:
        raise NotImplementedError

    def conjugate(self, p: Any) -> Any:
        raise NotImplementedError

    def conjugate_inverse(self, q: Any) -> Any:
        """Inverse of the conjugate restricted to ``p >= 0``."""
        raise NotImplementedError

    def max_second_derivative(self, a: float, b: float) -> float:
        u = np.linspace(a, b, SAMPLE_POINTS + 1)
        return float(np.max(self.second_derivative(u)))

    def lipschitz(self, a: float, b: float) -> float:
        # f' is monotone for a convex flux
        return float(max(abs(self.derivative(a)), abs(self.derivative(b))))

    def oleinik_sup(self, M: float) -> float:
        return _sampled_oleinik(self, M)

    def to_dict(self) -> dict:
        raise NotImplementedError


class Burgers(Flux):
    """f(u) = u^2 / 2."""

    def __call__(self, u):
        return 0.5 * np.asarray(u, dtype=float) ** 2

    def derivative(self, u):
        return np.asarray(u, dtype=float) * 1.0

    def second_derivative(self, u):
        return np.ones_like(np.asarray(u, dtype=float))

    def conjugate(self, p):
        return 0.5 * np.asarray(p, dtype=float) ** 2

    def conjugate_inverse(self, q):
        return np.sqrt(2.0 * np.asarray(q, dtype=float))

    def max_second_derivative(self, a, b):
        return 1.0

    def oleinik_sup(self, M):
        return 0.5

    def to_dict(self):
        return {"type": "burgers"}

    def __repr__(self):
        return "Burgers()"


class PowerFlux(Flux):
    """f(u) = c |u|^k with k > 1; ``c`` defaults to ``1/k``."""

    def __init__(self, exponent: float = 4.0, coefficient: float | None = None) -> None:
        if not exponent > 1:
            raise ValueError("exponent must exceed 1 for a convex superlinear flux")
        self.k = float(exponent)
        self.c = 1.0 / self.k if coefficient is None else float(coefficient)
        if self.c <= 0:
            raise ValueError("coefficient must be positive")

    def __call__(self, u):
        return self.c * np.abs(np.asarray(u, dtype=float)) ** self.k

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        return self.c * self.k * np.sign(u) * np.abs(u) ** (self.k - 1)

    def second_derivative(self, u):
        u = np.asarray(u, dtype=float)
        return self.c * self.k * (self.k - 1) * np.abs(u) ** (self.k - 2)

    def max_second_derivative(self, a, b):
        if self.k >= 2:
            return float(self.second_derivative(max(abs(a), abs(b))))
        return math.inf if a <= 0 <= b else float(self.second_derivative(min(abs(a), abs(b))))

    def conjugate(self, p):
        p = np.abs(np.asarray(p, dtype=float))
        ck = self.c * self.k
        return (1.0 - 1.0 / self.k) * p ** (self.k / (self.k - 1)) * ck ** (-1.0 / (self.k - 1))

    def conjugate_inverse(self, q):
        q = np.asarray(q, dtype=float)
        ck = self.c * self.k
        return (q * ck ** (1.0 / (self.k - 1)) / (1.0 - 1.0 / self.k)) ** ((self.k - 1) / self.k)

    def oleinik_sup(self, M):
        # a(v) = c (k - 1) v^(k - 2)
        if self.k >= 2:
            return self.c * (self.k - 1) * M ** (self.k - 2)
        return math.inf

    def to_dict(self):
        return {"type": "power", "exponent": self.k, "coefficient": self.c}

    def __repr__(self):
        return f"PowerFlux(exponent={self.k}, coefficient={self.c})"


class PiecewiseLinearFlux(Flux):
    """Convex broken-line flux through ``(nodes[j], values[j])``, affine beyond the end nodes.

    Interior nodes that are collinear with their neighbours are dropped, except
    a node at ``u = 0``.
    """

    is_piecewise_linear = True

    def __init__(self, nodes: Any, values: Any, spacing: float | None = None) -> None:
        u = np.asarray(nodes, dtype=float).reshape(-1)
        g = np.asarray(values, dtype=float).reshape(-1)
        if u.size < 2 or u.size != g.size:
            raise ValueError("a piecewise-linear flux needs at least two nodes")
        order = np.argsort(u)
        u, g = u[order], g[order]
        if np.any(np.diff(u) <= 0):
            raise ValueError("flux nodes must be distinct")
        s = np.diff(g) / np.diff(u)
        scale = max(float(np.max(np.abs(s))), 1.0)
        if np.any(np.diff(s) < -1e-12 * scale):
            raise ValueError("piecewise-linear flux is not convex")
        keep = np.ones(u.size, dtype=bool)
        keep[1:-1] = (np.diff(s) > 1e-14 * scale) | (u[1:-1] == 0.0)
        self.nodes = u[keep]
        self.node_values = g[keep]
        self.slopes = np.diff(self.node_values) / np.diff(self.nodes)
        self.graph = PiecewiseLinearFn(self.nodes, self.node_values, self.slopes[0], self.slopes[-1])
        self.spacing = spacing

    @property
    def slope_min(self) -> float:
        return float(self.slopes[0])

    @property
    def slope_max(self) -> float:
        return float(self.slopes[-1])

    def __call__(self, u):
        return self.graph(u)

    def derivative(self, u):
        """Right derivative."""
        u = np.asarray(u, dtype=float)
        idx = np.clip(np.searchsorted(self.nodes, u, side="right") - 1, 0, self.slopes.size - 1)
        out = self.slopes[idx]
        return out if out.ndim else float(out)

    def second_derivative(self, u):
        return np.zeros_like(np.asarray(u, dtype=float))

    def max_second_derivative(self, a, b):
        """Largest slope increment per half-span of the two adjacent segments."""
        if self.slopes.size < 2:
            return 0.0
        inner = self.nodes[1:-1]
        span = 0.5 * (self.nodes[2:] - self.nodes[:-2])
        curv = np.diff(self.slopes) / span
        mask = (inner >= a) & (inner <= b)
        return float(np.max(curv[mask])) if mask.any() else 0.0

    def lipschitz(self, a, b):
        lo = np.searchsorted(self.nodes, a, side="right") - 1
        hi = np.searchsorted(self.nodes, b, side="left")
        lo = int(np.clip(lo, 0, self.slopes.size - 1))
        hi = int(np.clip(hi - 1, lo, self.slopes.size - 1))
        return float(np.max(np.abs(self.slopes[lo : hi + 1])))

    def oleinik_sup(self, M):
        """Exact sup of a(v) = (f'(v) v - f(v)) / v^2 over (0, M].

        On a segment f'(v) v - f(v) is the constant ``slope*u_j - g_j``, so
        a(v) is monotone in v there and its sup sits at a segment end.
        """
        ends = np.concatenate((self.nodes, [max(M, self.nodes[-1]) + 1.0]))
        starts = np.concatenate(([min(self.nodes[0], 0.0) - 1.0], self.nodes))
        slopes = np.concatenate(([self.slopes[0]], self.slopes, [self.slopes[-1]]))
        anchor_u = np.concatenate(([self.nodes[0]], self.nodes))
        anchor_g = np.concatenate(([self.node_values[0]], self.node_values))
        best = 0.0
        for lo, hi, s, uj, gj in zip(starts, ends, slopes, anchor_u, anchor_g):
            lo, hi = max(lo, 0.0), min(hi, M)
            if hi <= lo:
                continue
            c = s * uj - gj
            if c > 0:
                best = max(best, math.inf if lo == 0.0 else c / lo**2)
            elif c < 0:
                best = max(best, c / hi**2)
        return best

    def node_index(self, u: float) -> int:
        j = int(np.searchsorted(self.nodes, u))
        if j < self.nodes.size and self.nodes[j] == u:
            return j
        raise ValueError(f"state {u!r} is not a flux node")

    def is_node(self, u: Any) -> Any:
        u = np.asarray(u, dtype=float)
        j = np.clip(np.searchsorted(self.nodes, u), 0, self.nodes.size - 1)
        return self.nodes[j] == u

    def nodes_between(self, a: float, b: float) -> np.ndarray:
        """Nodes strictly inside the open interval (min(a,b), max(a,b)), ascending."""
        lo, hi = (a, b) if a < b else (b, a)
        i = np.searchsorted(self.nodes, lo, side="right")
        j = np.searchsorted(self.nodes, hi, side="left")
        return self.nodes[i:j]

    def snap(self, u: Any) -> np.ndarray:
        """Nearest node for every entry of ``u`` (ties go to the lower node)."""
        u = np.asarray(u, dtype=float)
        j = np.clip(np.searchsorted(self.nodes, u), 1, self.nodes.size - 1)
        lo, hi = self.nodes[j - 1], self.nodes[j]
        return np.where(u - lo <= hi - u, lo, hi)

    def to_dict(self):
        return {"type": "pl", "nodes": [[float(a), float(b)] for a, b in zip(self.nodes, self.node_values)]}

    def __repr__(self):
        return f"PiecewiseLinearFlux(nodes={self.nodes.size}, spacing={self.spacing})"


def flux_from_dict(d: dict) -> Flux:
    kind = d.get("type")
    if kind == "burgers":
        return Burgers()
    if kind == "power":
        return PowerFlux(d.get("exponent", 4.0), d.get("coefficient"))
    if kind == "pl":
        nodes = np.asarray(d["nodes"], dtype=float)
        return PiecewiseLinearFlux(nodes[:, 0], nodes[:, 1])
    raise ValueError(f"unknown flux type {kind!r}")


def interpolate_flux(f: Flux, delta: float, M: float) -> PiecewiseLinearFlux:
    """Interpolate ``f`` on the lattice ``j*delta``.

    The node range is symmetric and covers ``[-(M + delta), M + delta]``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    J = math.ceil(M / delta - 1e-12) + 1
    j = np.arange(-J, J + 1)
    nodes = j * delta
    return PiecewiseLinearFlux(nodes, f(nodes), spacing=delta)


@dataclass(frozen=True, eq=False)
class ConjugatePair:
    """Legendre conjugate ``f*`` together with its inverse on ``[0, inf)``."""

    flux: Flux
    slope_min: float
    slope_max: float
    kinks: np.ndarray
    kink_values: np.ndarray

    @property
    def is_piecewise_linear(self) -> bool:
        return self.flux.is_piecewise_linear

    def __call__(self, p: Any) -> Any:
        f = self.flux
        if not f.is_piecewise_linear:
            return f.conjugate(p)
        p = np.asarray(p, dtype=float)
        j = np.clip(np.searchsorted(f.slopes, p, side="left"), 0, f.nodes.size - 1)
        out = f.nodes[j] * p - f.node_values[j]
        out = np.where((p < self.slope_min) | (p > self.slope_max), np.inf, out)
        return out if out.ndim else float(out)

    @property
    def inverse_graph(self) -> PiecewiseLinearFn:
        """The restricted inverse as a broken line in ``q`` (piecewise-linear fluxes only)."""
        g = self.__dict__.get("_inverse_graph")
        if g is None:
            g = _build_inverse_graph(self)
            self.__dict__["_inverse_graph"] = g
        return g

    @property
    def inverse_kinks(self) -> np.ndarray:
        if not self.is_piecewise_linear:
            return np.empty(0)
        return self.inverse_graph.breakpoints

    def inverse(self, q: Any) -> Any:
        q = np.asarray(q, dtype=float)
        if np.any(q < 0):
            raise ValueError("restricted inverse is defined for q >= 0 only")
        if self.is_piecewise_linear:
            return self.inverse_graph(q)
        return self.flux.conjugate_inverse(q)


def _build_inverse_graph(cp: ConjugatePair) -> PiecewiseLinearFn:
    if cp.slope_max < 0:
        raise ValueError("conjugate has no domain on p >= 0")
    ps = np.concatenate(([max(cp.slope_min, 0.0)], cp.kinks[cp.kinks > max(cp.slope_min, 0.0)]))
    qs = np.asarray(cp(ps), dtype=float)
    scale = max(float(np.max(np.abs(qs))), 1.0)
    if cp.slope_min > 0 or abs(qs[0]) > 1e-12 * scale:
        raise ValueError("restricted inverse needs f(0) = 0 to be the minimum of f")
    if np.any(np.diff(qs) < -1e-12 * scale):
        raise ValueError("conjugate is not nondecreasing on p >= 0")
    qs[0] = 0.0
    qs = np.maximum.accumulate(qs)
    # sup convention: a flat stretch of f* maps to its right end
    start = int(np.flatnonzero(qs == qs[0])[-1])
    qs, ps = qs[start:], ps[start:]
    return PiecewiseLinearFn(qs, ps, 0.0, 0.0)


def legendre_transform(f: Flux) -> ConjugatePair:
    """Legendre conjugate of a convex flux (exact for piecewise-linear fluxes)."""
    if f.is_piecewise_linear:
        s = f.slopes
        if np.any(np.diff(s) < 0):
            raise ValueError("flux is not convex")
        kv = f.nodes[1:] * s - f.node_values[1:]
        return ConjugatePair(f, float(s[0]), float(s[-1]), s.copy(), kv)
    return ConjugatePair(f, -math.inf, math.inf, np.empty(0), np.empty(0))


def restricted_inverse(cp: ConjugatePair, q: Any) -> Any:
    """sup{p >= 0 : f*(p) <= q}, clamped to the top of the slope range."""
    return cp.inverse(q)


def _sampled_oleinik(f: Flux, M: float, tol: float = 1e-6) -> float:
    n = SAMPLE_POINTS
    prev = None
    for _ in range(8):
        v = np.linspace(M / n, M, n)
        a = (f.derivative(v) * v - f(v)) / v**2
        cur = float(np.max(a))
        if prev is not None and abs(cur - prev) <= tol * max(1.0, abs(cur)):
            return max(cur, 0.0)
        prev, n = cur, 2 * n
    return max(cur, 0.0)


def oleinik_a_sup(f: Flux, M: float) -> float:
    """sup over (0, M] of a(v) = (f'(v) v - f(v)) / v^2."""
    if not M > 0:
        raise ValueError("M must be positive")
    return float(f.oleinik_sup(M))


def flux_gap(f: Flux, g: Flux, M: float) -> float:
    """sup over [-M, M] of |f - g| on a lattice refined by all broken-line nodes and chord midpoints."""
    pts = [np.linspace(-M, M, SAMPLE_POINTS + 1), np.linspace(-M, M, 2 * SAMPLE_POINTS + 1)]
    for h in (f, g):
        if h.is_piecewise_linear:
            pts.append(h.nodes)
            pts.append(0.5 * (h.nodes[1:] + h.nodes[:-1]))
    u = np.concatenate(pts)
    u = u[(u >= -M) & (u <= M)]
    return float(np.max(np.abs(f(u) - g(u))))
