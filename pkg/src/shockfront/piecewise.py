"""Exact piecewise-constant and piecewise-linear functions on the real line.

The step functions here carry front-tracking states and projected initial
data; the broken lines carry primitives (distribution functions), fluxes and
their conjugates. Quantile functions are stored with explicit jumps so that
sup-type distances can be evaluated exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Protocol

import numpy as np

BREAKPOINT_RTOL = 1e-12


def _as_float_array(a: Any) -> np.ndarray:
    return np.asarray(a, dtype=float).reshape(-1)


def _canonical(breakpoints: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Drop degenerate cells, merge equal neighbours and trim zero cells at both ends."""
    if values.size == 0:
        return np.empty(0), np.empty(0)
    width = breakpoints[-1] - breakpoints[0]
    tol = BREAKPOINT_RTOL * max(width, 1e-300)
    keep = np.diff(breakpoints) > tol
    if not keep.all():
        # removing cell i moves the left edge of cell i+1 onto x_i
        idx = np.flatnonzero(keep)
        if idx.size == 0:
            return np.empty(0), np.empty(0)
        left = breakpoints[idx].copy()
        right = np.append(left[1:], breakpoints[idx[-1] + 1])
        breakpoints = np.append(left, right[-1])
        values = values[idx]
    interior = np.flatnonzero(values[1:] != values[:-1]) + 1
    values = values[np.concatenate(([0], interior))]
    breakpoints = np.concatenate(([breakpoints[0]], breakpoints[interior], [breakpoints[-1]]))
    nz = np.flatnonzero(values != 0.0)
    if nz.size == 0:
        return np.empty(0), np.empty(0)
    lo, hi = nz[0], nz[-1]
    return breakpoints[lo : hi + 2].copy(), values[lo : hi + 1].copy()


@dataclass(frozen=True, eq=False)
class PiecewiseConstantFn:
    """Compactly supported step function, value ``values[i]`` on ``[x_i, x_{i+1})``.

    Always stored in canonical form: no zero-width cells, no two adjacent equal
    values and no zero cells at either end. The zero function has no breakpoints.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __init__(self, breakpoints: Any, values: Any) -> None:
        b = _as_float_array(breakpoints)
        v = _as_float_array(values)
        if v.size == 0:
            b = np.empty(0)
        elif b.size != v.size + 1:
            raise ValueError(f"need len(breakpoints) == len(values) + 1, got {b.size} and {v.size}")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(v))):
            raise ValueError("breakpoints and values must be finite")
        if np.any(np.diff(b) < 0):
            raise ValueError("breakpoints must be nondecreasing")
        b, v = _canonical(b, v)
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls) -> PiecewiseConstantFn:
        return cls([], [])

    @classmethod
    def indicator(cls, a: float, b: float, height: float = 1.0) -> PiecewiseConstantFn:
        return cls([a, b], [height])

    @classmethod
    def from_cells(cls, left: float, width: float, values: Any) -> PiecewiseConstantFn:
        """Uniform cells of the given width starting at ``left``."""
        v = _as_float_array(values)
        return cls(left + width * np.arange(v.size + 1), v)

    # -- evaluation -------------------------------------------------------
    def __call__(self, x: Any) -> np.ndarray | float:
        xa = np.asarray(x, dtype=float)
        out = np.zeros_like(xa)
        if self.values.size:
            idx = np.searchsorted(self.breakpoints, xa, side="right") - 1
            inside = (idx >= 0) & (idx < self.values.size)
            out[inside] = self.values[idx[inside]]
        return out if out.ndim else float(out)

    density = __call__

    @property
    def is_zero(self) -> bool:
        return self.values.size == 0

    @property
    def support(self) -> tuple[float, float]:
        if self.is_zero:
            return (0.0, 0.0)
        return (float(self.breakpoints[0]), float(self.breakpoints[-1]))

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def mass(self) -> float:
        return mass(self)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    @property
    def knots(self) -> np.ndarray:
        return self.breakpoints

    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0.0))

    def has_connected_support(self) -> bool:
        return not np.any(self.values == 0.0)

    # -- cached derived objects used by the distance routines ---------------
    @cached_property
    def _primitive(self) -> PiecewiseLinearFn:
        return primitive(self)

    @cached_property
    def _quantile(self) -> QuantileFn:
        return pseudo_inverse(self._primitive)

    def cdf(self, x: Any) -> np.ndarray | float:
        return self._primitive(x)

    def quantile(self, xi: Any, side: str = "right") -> np.ndarray | float:
        return self._quantile(xi, side=side)

    @property
    def quantile_knots(self) -> np.ndarray:
        return self._quantile.knots

    # -- algebra ------------------------------------------------------------
    def _binary(self, other: PiecewiseConstantFn, op) -> PiecewiseConstantFn:
        b = np.union1d(self.breakpoints, other.breakpoints)
        if b.size < 2:
            return PiecewiseConstantFn.zero()
        mid = 0.5 * (b[:-1] + b[1:])
        return PiecewiseConstantFn(b, op(self(mid), other(mid)))

    def __add__(self, other: PiecewiseConstantFn) -> PiecewiseConstantFn:
        return self._binary(other, np.add)

    def __sub__(self, other: PiecewiseConstantFn) -> PiecewiseConstantFn:
        return self._binary(other, np.subtract)

    def __neg__(self) -> PiecewiseConstantFn:
        return PiecewiseConstantFn(self.breakpoints, -self.values)

    def __mul__(self, alpha: float) -> PiecewiseConstantFn:
        return PiecewiseConstantFn(self.breakpoints, alpha * self.values)

    __rmul__ = __mul__

    def shift(self, h: float) -> PiecewiseConstantFn:
        return PiecewiseConstantFn(self.breakpoints + h, self.values)

    def restrict(self, a: float, b: float) -> PiecewiseConstantFn:
        if self.is_zero or b <= a:
            return PiecewiseConstantFn.zero()
        inner = self.breakpoints[(self.breakpoints > a) & (self.breakpoints < b)]
        pts = np.concatenate(([a], inner, [b]))
        return PiecewiseConstantFn(pts, self(0.5 * (pts[:-1] + pts[1:])))

    def equals(self, other: PiecewiseConstantFn, atol: float = 0.0) -> bool:
        if self.values.size != other.values.size:
            return False
        return bool(
            np.allclose(self.breakpoints, other.breakpoints, rtol=0, atol=atol)
            and np.allclose(self.values, other.values, rtol=0, atol=atol)
        )

    def to_dict(self) -> dict:
        return {"kind": "pc", "breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}

    def __repr__(self) -> str:
        return f"PiecewiseConstantFn(cells={self.values.size}, support={self.support})"


@dataclass(frozen=True, eq=False)
class PiecewiseLinearFn:
    """Continuous broken line through ``(breakpoints[i], values[i])``.

    Outside the node range the function continues affinely with
    ``left_slope`` / ``right_slope``.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    left_slope: float = 0.0
    right_slope: float = 0.0

    def __init__(self, breakpoints: Any, values: Any, left_slope: float = 0.0, right_slope: float = 0.0) -> None:
        b = _as_float_array(breakpoints)
        v = _as_float_array(values)
        if b.size == 0 or b.size != v.size:
            raise ValueError("need at least one node and matching breakpoints/values")
        if np.any(np.diff(b) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "left_slope", float(left_slope))
        object.__setattr__(self, "right_slope", float(right_slope))

    @cached_property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.breakpoints)

    @property
    def all_slopes(self) -> np.ndarray:
        return np.concatenate(([self.left_slope], self.slopes, [self.right_slope]))

    @property
    def is_nondecreasing(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0) and self.left_slope >= 0 and self.right_slope >= 0)

    def __call__(self, x: Any) -> np.ndarray | float:
        xa = np.asarray(x, dtype=float)
        b, v = self.breakpoints, self.values
        if b.size == 1:
            out = np.where(xa < b[0], v[0] + self.left_slope * (xa - b[0]), v[0] + self.right_slope * (xa - b[0]))
            return out if out.ndim else float(out)
        idx = np.clip(np.searchsorted(b, xa, side="right") - 1, 0, b.size - 2)
        out = v[idx] + self.slopes[idx] * (xa - b[idx])
        out = np.where(xa == b[-1], v[-1], out)
        out = np.where(xa < b[0], v[0] + self.left_slope * (xa - b[0]), out)
        out = np.where(xa > b[-1], v[-1] + self.right_slope * (xa - b[-1]), out)
        return out if out.ndim else float(out)

    def derivative(self) -> PiecewiseConstantFn:
        """Segment-wise slope on the node range (extensions ignored)."""
        if self.breakpoints.size < 2:
            return PiecewiseConstantFn.zero()
        return PiecewiseConstantFn(self.breakpoints, self.slopes)

    def to_dict(self) -> dict:
        return {
            "kind": "pl",
            "breakpoints": self.breakpoints.tolist(),
            "values": self.values.tolist(),
            "left_slope": self.left_slope,
            "right_slope": self.right_slope,
        }

    def __repr__(self) -> str:
        return f"PiecewiseLinearFn(nodes={self.breakpoints.size})"


@dataclass(frozen=True, eq=False)
class QuantileFn:
    """Right-continuous pseudo-inverse ``xi -> inf{x : U(x) > xi}`` on ``[0, mass]``.

    Segment ``k`` maps ``[knots[k], knots[k+1]]`` affinely onto
    ``[x_start[k], x_end[k]]``; a jump sits at ``knots[k]`` whenever
    ``x_end[k-1] < x_start[k]``.
    """

    knots: np.ndarray
    x_start: np.ndarray
    x_end: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.knots[-1]) if self.knots.size else 0.0

    @property
    def jumps(self) -> list[tuple[float, float, float]]:
        """``(xi, left limit, right value)`` for every jump."""
        k = np.flatnonzero(self.x_start[1:] > self.x_end[:-1]) + 1
        return [(float(self.knots[i]), float(self.x_end[i - 1]), float(self.x_start[i])) for i in k]

    def __call__(self, xi: Any, side: str = "right") -> np.ndarray | float:
        xa = np.asarray(xi, dtype=float)
        if self.knots.size == 0:
            raise ValueError("quantile of a zero-mass distribution is undefined")
        m = self.knots[-1]
        slack = 1e-12 * max(m, 1e-300)
        if np.any(xa < -slack) or np.any(xa > m + slack):
            raise ValueError(f"quantile argument outside [0, {m}]")
        n = self.x_start.size
        if side == "right":
            k = np.searchsorted(self.knots, xa, side="right") - 1
        elif side == "left":
            k = np.searchsorted(self.knots, xa, side="left") - 1
        else:
            raise ValueError("side must be 'right' or 'left'")
        k = np.clip(k, 0, n - 1)
        lo, hi = self.knots[k], self.knots[k + 1]
        frac = np.clip((xa - lo) / (hi - lo), 0.0, 1.0)
        out = self.x_start[k] + (self.x_end[k] - self.x_start[k]) * frac
        return out if out.ndim else float(out)


def mass(u: PiecewiseConstantFn) -> float:
    """Integral of a step function."""
    if u.is_zero:
        return 0.0
    return float(math.fsum(u.values * u.widths))


def total_variation(u: PiecewiseConstantFn) -> float:
    """Sum of all jump sizes, including the jumps to zero at both ends."""
    if u.is_zero:
        return 0.0
    padded = np.concatenate(([0.0], u.values, [0.0]))
    return float(np.sum(np.abs(np.diff(padded))))


def lip_plus(u: PiecewiseConstantFn | PiecewiseLinearFn) -> float:
    """Smallest one-sided Lipschitz constant: sup of (u(x+z)-u(x))/z over z > 0."""
    if isinstance(u, PiecewiseConstantFn):
        padded = np.concatenate(([0.0], u.values, [0.0]))
        return math.inf if np.any(np.diff(padded) > 0) else 0.0
    return float(max(0.0, np.max(u.all_slopes)))


def primitive(u: PiecewiseConstantFn) -> PiecewiseLinearFn:
    """U(x) = integral of u over (-inf, x]."""
    if u.is_zero:
        return PiecewiseLinearFn([0.0], [0.0])
    acc = np.concatenate(([0.0], np.cumsum(u.values * u.widths)))
    return PiecewiseLinearFn(u.breakpoints, acc)


def pseudo_inverse(U: PiecewiseLinearFn) -> QuantileFn:
    """Quantile function of a bounded nondecreasing broken line with U(-inf) = 0."""
    if U.left_slope != 0.0 or U.right_slope != 0.0:
        raise ValueError("distribution function must be constant outside its node range")
    v = U.values
    scale = max(float(np.max(np.abs(v))), 1e-300)
    if np.any(np.diff(v) < -1e-14 * scale):
        raise ValueError("distribution function is not nondecreasing")
    if abs(v[0]) > 1e-14 * scale:
        raise ValueError("distribution function must vanish at -infinity")
    v = np.maximum.accumulate(np.concatenate(([0.0], v[1:])))
    rising = np.flatnonzero(np.diff(v) > 0)
    if rising.size == 0:
        return QuantileFn(np.empty(0), np.empty(0), np.empty(0))
    b = U.breakpoints
    knots = np.concatenate(([v[rising[0]]], v[rising + 1]))
    # flat stretches between rising pieces leave consecutive knots equal
    # to the same level, which is exactly where the quantile jumps
    knots[0] = 0.0
    return QuantileFn(knots, b[rising].copy(), b[rising + 1].copy())


class HasAntiderivative(Protocol):
    support: tuple[float, float]

    def cdf(self, x: Any) -> Any: ...


def project_to_grid(u0: HasAntiderivative, dx: float) -> PiecewiseConstantFn:
    """Exact cell averages on the grid with cell centres ``i*dx``.

    ``u0`` must expose ``support`` and an exact antiderivative ``cdf``.
    """
    if not dx > 0:
        raise ValueError("dx must be positive")
    a, b = u0.support
    if b <= a:
        return PiecewiseConstantFn.zero()
    # cell i is [(i - 1/2) dx, (i + 1/2) dx); keep those meeting [a, b)
    i_lo = math.floor(a / dx + 0.5 + 1e-9)
    i_hi = math.ceil(b / dx + 0.5 - 1e-9) - 1
    edges = (np.arange(i_lo, i_hi + 2) - 0.5) * dx
    prim = np.asarray(u0.cdf(edges), dtype=float)
    return PiecewiseConstantFn(edges, np.diff(prim) / dx)


def l1_distance(u: PiecewiseConstantFn, v: PiecewiseConstantFn) -> float:
    """Exact L1 distance via merged breakpoints."""
    d = u - v
    if d.is_zero:
        return 0.0
    return float(math.fsum(np.abs(d.values) * d.widths))


def to_json_dict(f: PiecewiseConstantFn | PiecewiseLinearFn) -> dict:
    return f.to_dict()


def from_json_dict(d: dict) -> PiecewiseConstantFn | PiecewiseLinearFn:
    kind = d.get("kind")
    if kind == "pc":
        return PiecewiseConstantFn(d["breakpoints"], d["values"])
    if kind == "pl":
        return PiecewiseLinearFn(d["breakpoints"], d["values"], d.get("left_slope", 0.0), d.get("right_slope", 0.0))
    raise ValueError(f"unknown function kind {kind!r}")
