"""One-dimensional Wasserstein distances and the stability diagnostics built on them.

Between two step functions everything is exact: W1 integrates |U - V| of two
broken lines, W_p and W_inf work on the difference of two quantile functions
that is affine between merged knots. When one side is an analytic density
(any object with ``cdf``, ``quantile``, ``density``, ``knots``,
``quantile_knots``, ``mass`` and ``support``) the same quantities are
integrated with Gauss-Legendre on pieces split at the sign changes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from .flux import Flux, flux_gap, legendre_transform
from .piecewise import PiecewiseConstantFn, l1_distance, lip_plus

MASS_RTOL = 1e-10

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


# -- helpers ------------------------------------------------------------------


def _is_pc(u: Any) -> bool:
    return isinstance(u, PiecewiseConstantFn)


def _check_masses(u: Any, v: Any) -> float:
    mu, mv = float(u.mass), float(v.mass)
    scale = max(abs(mu), abs(mv))
    if _is_pc(u) and _is_pc(v):
        scale = max(scale, _abs_mass(u), _abs_mass(v))
    if abs(mu - mv) > MASS_RTOL * max(scale, 1e-300):
        raise ValueError(f"masses differ: {mu!r} vs {mv!r}")
    return min(mu, mv)


def _abs_mass(u: PiecewiseConstantFn) -> float:
    return float(np.sum(np.abs(u.values) * u.widths)) if not u.is_zero else 0.0


def _check_nonnegative(u: Any) -> None:
    if _is_pc(u) and not u.is_nonnegative():
        raise ValueError("W_p and W_inf need nonnegative densities")


def _abs_power_integral(d0: np.ndarray, d1: np.ndarray, length: np.ndarray, p: float) -> float:
    """Sum over pieces of the integral of |affine|^p from value d0 to value d1."""
    a, b = np.abs(d0), np.abs(d1)
    cross = (d0 * d1) < 0
    out = np.zeros_like(a)
    # opposite signs: split at the zero crossing
    if np.any(cross):
        ac, bc = a[cross], b[cross]
        out[cross] = (ac ** (p + 1) + bc ** (p + 1)) / ((p + 1) * (ac + bc))
    same = ~cross
    lo, hi = np.minimum(a[same], b[same]), np.maximum(a[same], b[same])
    res = np.zeros_like(lo)
    pos = hi > 0
    r = lo[pos] / hi[pos]
    one_minus = 1.0 - r
    with np.errstate(divide="ignore", invalid="ignore"):
        # (1 - r^(p+1)) / ((p+1)(1 - r)), stable as r -> 1
        ratio = np.where(
            one_minus > 1e-8,
            -np.expm1((p + 1) * np.log(np.where(r > 0, r, 1.0))) / ((p + 1) * one_minus),
            1.0 - 0.5 * p * one_minus,
        )
        ratio = np.where(r > 0, ratio, 1.0 / (p + 1))
    res[pos] = hi[pos] ** p * ratio
    out[same] = res
    return float(math.fsum(out * length))


def _merged(a: np.ndarray, b: np.ndarray, lo: float | None = None, hi: float | None = None) -> np.ndarray:
    k = np.union1d(a, b)
    if lo is not None:
        k = k[(k >= lo) & (k <= hi)]
        k = np.union1d(k, [lo, hi])
    return k


def _subgrid(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    s = np.linspace(0.0, 1.0, n + 1)
    return a[:, None] + (b - a)[:, None] * s[None, :]


def _eval_sided(fun: Callable, pts: np.ndarray) -> np.ndarray:
    """Evaluate on a sub-grid: first column from the right, last column from the left."""
    out = np.empty_like(pts)
    out[:, :-1] = fun(pts[:, :-1], "right")
    out[:, -1] = fun(pts[:, -1], "left")
    return out


def integrate_abs(fun: Callable, a: np.ndarray, b: np.ndarray, p: float = 1.0, nsub: int = 8) -> float:
    """Integral of |fun|^p over the union of the intervals [a_i, b_i].

    ``fun(x, side)`` must be smooth inside each interval. Sign changes found on
    an ``nsub``-point sub-grid are located by bisection before Gauss-Legendre
    is applied on every piece.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    keep = b > a
    a, b = a[keep], b[keep]
    if a.size == 0:
        return 0.0
    pts = _subgrid(a, b, nsub)
    vals = _eval_sided(fun, pts)
    lo, hi = pts[:, :-1].ravel(), pts[:, 1:].ravel()
    flo, fhi = vals[:, :-1].ravel(), vals[:, 1:].ravel()
    cross = (flo * fhi) < 0
    roots = np.empty(int(cross.sum()))
    if roots.size:
        l, h, fl = lo[cross].copy(), hi[cross].copy(), flo[cross].copy()
        for _ in range(60):
            m = 0.5 * (l + h)
            fm = fun(m, "right")
            left = (fm * fl) <= 0
            h = np.where(left, m, h)
            l = np.where(left, l, m)
            fl = np.where(left, fl, fm)
        roots = 0.5 * (l + h)
    starts = np.concatenate((lo[~cross], lo[cross], roots))
    ends = np.concatenate((hi[~cross], roots, hi[cross]))
    mid, half = 0.5 * (starts + ends), 0.5 * (ends - starts)
    x = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    fx = np.abs(fun(x, "right")) ** p
    return float(math.fsum((fx @ _GL_WEIGHTS) * half))


def sup_abs(fun: Callable, a: np.ndarray, b: np.ndarray, nsample: int = 32, iters: int = 60) -> float:
    """sup of |fun| over the intervals, one-sided limits at the ends included."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    keep = b > a
    a, b = a[keep], b[keep]
    if a.size == 0:
        return 0.0
    pts = _subgrid(a, b, nsample)
    vals = np.abs(_eval_sided(fun, pts))
    best = float(np.max(vals))
    k = np.argmax(vals[:, 1:-1], axis=1) + 1
    rows = np.arange(a.size)
    lo, hi = pts[rows, k - 1], pts[rows, k + 1]
    gr = 0.5 * (math.sqrt(5.0) - 1.0)
    c, d = hi - gr * (hi - lo), lo + gr * (hi - lo)
    fc, fd = np.abs(fun(c, "right")), np.abs(fun(d, "right"))
    for _ in range(iters):
        move = fc > fd
        hi = np.where(move, d, hi)
        lo = np.where(move, lo, c)
        c_new = hi - gr * (hi - lo)
        d_new = lo + gr * (hi - lo)
        c, d = np.where(move, c_new, d), np.where(move, c, d_new)
        fc, fd = np.where(move, np.abs(fun(c_new, "right")), fd), np.where(move, fc, np.abs(fun(d_new, "right")))
    return max(best, float(np.max(np.maximum(fc, fd))))


def _cdf_diff(u: Any, v: Any) -> Callable:
    return lambda x, side="right": np.asarray(u.cdf(x), float) - np.asarray(v.cdf(x), float)


def _quantile_diff(u: Any, v: Any) -> Callable:
    return lambda xi, side="right": np.asarray(u.quantile(xi, side), float) - np.asarray(v.quantile(xi, side), float)


def _density_diff(u: Any, v: Any) -> Callable:
    return lambda x, side="right": np.asarray(u.density(x), float) - np.asarray(v.density(x), float)


def _pc_quantile_pieces(u: PiecewiseConstantFn, v: PiecewiseConstantFn, m: float):
    ku, kv = u.quantile_knots, v.quantile_knots
    k = _merged(ku, kv, 0.0, m)
    a, b = k[:-1], k[1:]
    # Knots that agree in exact arithmetic can come out of the cumulative sums
    # a few ulps apart. The sliver between them would pair one quantile's
    # pre-jump side with the other's post-jump side; it has (numerically) zero
    # measure, so it is dropped rather than allowed to set the sup.
    tol = 4.0 * np.finfo(float).eps * max(ku.size, kv.size, 1) * m
    keep = (b - a) > tol
    if np.any(keep):
        a, b = a[keep], b[keep]
    d0 = u.quantile(a, "right") - v.quantile(a, "right")
    d1 = u.quantile(b, "left") - v.quantile(b, "left")
    return d0, d1, b - a


# -- distances ------------------------------------------------------------------


def w1(u: Any, v: Any) -> float:
    """W1 as the integral of |U - V| (needs equal masses; signs are allowed)."""
    _check_masses(u, v)
    if _is_pc(u) and _is_pc(v):
        if u.is_zero and v.is_zero:
            return 0.0
        x = np.union1d(u.breakpoints, v.breakpoints)
        d = u.cdf(x) - v.cdf(x)
        return _abs_power_integral(d[:-1], d[1:], np.diff(x), 1.0)
    x = np.union1d(u.knots, v.knots)
    return integrate_abs(_cdf_diff(u, v), x[:-1], x[1:])


def wp(u: Any, v: Any, p: float) -> float:
    """W_p as the L^p distance of the quantile functions on [0, mass]."""
    if not p >= 1:
        raise ValueError("p must be at least 1")
    if math.isinf(p):
        return winf(u, v)
    m = _check_masses(u, v)
    _check_nonnegative(u)
    _check_nonnegative(v)
    if m <= 0:
        return 0.0
    if _is_pc(u) and _is_pc(v):
        d0, d1, length = _pc_quantile_pieces(u, v, m)
        return _abs_power_integral(d0, d1, length, p) ** (1.0 / p)
    k = _merged(u.quantile_knots, v.quantile_knots, 0.0, m)
    return integrate_abs(_quantile_diff(u, v), k[:-1], k[1:], p=p) ** (1.0 / p)


def winf(u: Any, v: Any) -> float:
    """W_inf as the sup distance of the quantile functions, jump limits included."""
    m = _check_masses(u, v)
    _check_nonnegative(u)
    _check_nonnegative(v)
    if m <= 0:
        return 0.0
    if _is_pc(u) and _is_pc(v):
        d0, d1, _ = _pc_quantile_pieces(u, v, m)
        return float(max(np.max(np.abs(d0)), np.max(np.abs(d1))))
    k = _merged(u.quantile_knots, v.quantile_knots, 0.0, m)
    return sup_abs(_quantile_diff(u, v), k[:-1], k[1:])


def l1(u: Any, v: Any) -> float:
    if _is_pc(u) and _is_pc(v):
        return l1_distance(u, v)
    x = np.union1d(u.knots, v.knots)
    return integrate_abs(_density_diff(u, v), x[:-1], x[1:])


def primitive_sup(u: Any, v: Any) -> float:
    """sup over x of |U(x) - V(x)|."""
    _check_masses(u, v)
    if _is_pc(u) and _is_pc(v):
        x = np.union1d(u.breakpoints, v.breakpoints)
        if x.size == 0:
            return 0.0
        return float(np.max(np.abs(u.cdf(x) - v.cdf(x))))
    x = np.union1d(u.knots, v.knots)
    return sup_abs(_cdf_diff(u, v), x[:-1], x[1:])


def interpolation_check(u: Any, v: Any, p: float) -> tuple[float, float]:
    """(W_p, W_1^(1/p) W_inf^(1 - 1/p)); the first never exceeds the second."""
    a, b, c = wp(u, v, p), w1(u, v), winf(u, v)
    return a, b ** (1.0 / p) * c ** (1.0 - 1.0 / p)


@dataclass
class DistanceReport:
    w1: float
    wp: dict[float, float]
    winf: float | None
    l1: float
    primitive_sup: float
    masses_equal: bool
    nonnegative: bool

    def to_dict(self) -> dict:
        return {
            "w1": self.w1,
            "wp": {("inf" if math.isinf(p) else format(p, "g")): val for p, val in self.wp.items()},
            "winf": self.winf,
            "l1": self.l1,
            "primitive_sup": self.primitive_sup,
            "masses_equal": self.masses_equal,
            "nonnegative": self.nonnegative,
        }


def distance_report(u: PiecewiseConstantFn, v: PiecewiseConstantFn, ps: Sequence[float] = (1.0, 2.0, math.inf)) -> DistanceReport:
    """All distances between two step functions; W_p entries need nonnegative data."""
    try:
        _check_masses(u, v)
        equal = True
    except ValueError:
        equal = False
    nonneg = u.is_nonnegative() and v.is_nonnegative()
    if not equal:
        raise ValueError("distance report needs equal masses")
    wps = {float(p): (wp(u, v, p) if nonneg else math.nan) for p in ps}
    return DistanceReport(
        w1=w1(u, v),
        wp=wps,
        winf=winf(u, v) if nonneg else None,
        l1=l1_distance(u, v),
        primitive_sup=primitive_sup(u, v),
        masses_equal=equal,
        nonnegative=nonneg,
    )


# -- stability diagnostics ----------------------------------------------------------


def _initial(run: Any) -> Any:
    return run.initial


def _sup(u: Any) -> float:
    return float(u.sup_norm)


def stability_constant(flux: Flux, lip_constant: float, M: float, t: float) -> float:
    """exp(||f'||_Lip * C * t) with the Lipschitz norm of f' taken on [-M, M]."""
    return math.exp(flux.max_second_derivative(-M, M) * lip_constant * t)


def stability_bound_check(run_u: Any, run_v: Any, t: float, *, lip_constant: float | None = None) -> tuple[float, float]:
    """(W1(u(t), v(t)), C(t) [W1(u0, v0) + t K(t) sup|f - g|]).

    ``C`` is the one-sided Lipschitz constant of the initial data: the finite
    one of the two (the first if both are), or ``lip_constant`` if given.
    ``K(t)`` bounds the support length: the wider initial support plus
    ``t`` times the flux Lipschitz constant on the state range.
    """
    u0, v0 = _initial(run_u), _initial(run_v)
    if lip_constant is None:
        cands = [c for c in (lip_plus_of(u0), lip_plus_of(v0)) if math.isfinite(c)]
        if not cands:
            raise ValueError("both initial data have unbounded Lip+; pass lip_constant explicitly")
        lip_constant = cands[0]
    M = max(_sup(u0), _sup(v0))
    f, g = run_u.flux, run_v.flux
    pad = max(getattr(f, "spacing", None) or 0.0, getattr(g, "spacing", None) or 0.0)
    lip = max(f.lipschitz(-M - pad, M + pad), g.lipschitz(-M - pad, M + pad))
    width = max(_width(u0), _width(v0))
    K = width + lip * t
    rhs = stability_constant(f, lip_constant, M, t) * (w1(u0, v0) + t * K * flux_gap(f, g, M))
    lhs = w1(run_u.snapshot(t), run_v.snapshot(t))
    return lhs, rhs


def lip_plus_of(u: Any) -> float:
    return lip_plus(u) if _is_pc(u) else float(u.lip_plus)


def _width(u: Any) -> float:
    a, b = u.support
    return b - a


def winf_contraction_check(run_u: Any, run_v: Any, t: float) -> tuple[float, float]:
    """(W_inf(u(t), v(t)), W_inf(u0, v0)) for two evolutions under the same flux."""
    if run_u.flux is not run_v.flux and run_u.flux.to_dict() != run_v.flux.to_dict():
        raise ValueError("contraction check needs the same flux for both evolutions")
    return winf(run_u.snapshot(t), run_v.snapshot(t)), winf(_initial(run_u), _initial(run_v))


def flux_inverse_gap(f: Flux, g: Flux, t: float, mass: float = 1.0, samples: int = 2**12) -> float:
    """t * sup over gamma in [0, mass] of |f~(gamma/t) - g~(gamma/t)|."""
    if t <= 0:
        return 0.0
    cf, cg = legendre_transform(f), legendre_transform(g)
    q = [np.linspace(0.0, mass / t, samples + 1)]
    for cp in (cf, cg):
        k = cp.inverse_kinks
        q.append(k[(k >= 0) & (k <= mass / t)])
    q = np.concatenate(q)
    return float(t * np.max(np.abs(cf.inverse(q) - cg.inverse(q))))


def winf_flux_stability_check(run_u: Any, run_v: Any, t: float) -> tuple[float, float]:
    """(W_inf(u(t), v(t)), t sup|f~ - g~|(gamma/t)) for the same initial data under two fluxes."""
    u0, v0 = _initial(run_u), _initial(run_v)
    if _is_pc(u0) and _is_pc(v0) and not u0.equals(v0, atol=0.0):
        raise ValueError("flux stability check needs identical initial data")
    lhs = winf(run_u.snapshot(t), run_v.snapshot(t))
    return lhs, flux_inverse_gap(run_u.flux, run_v.flux, t, mass=float(u0.mass))
