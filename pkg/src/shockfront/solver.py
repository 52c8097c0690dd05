"""Event-driven front tracking for u_t + f(u)_x = 0 with a convex broken-line flux.

Every Riemann problem is solved exactly, fronts move with constant speed, and
whenever fronts meet the local Riemann problem is solved again. The run keeps
the full event history so the profile can be read back at any time.

Also here: two oracles that never touch the event engine, the Hopf-Lax formula
for the primitive and the max formula for its inverse.
"""

from __future__ import annotations

import heapq
import logging
import math
import time as _time
from dataclasses import dataclass, field
from typing import Any, Iterator

import numpy as np

from .flux import ConjugatePair, PiecewiseLinearFlux
from .piecewise import PiecewiseConstantFn, PiecewiseLinearFn, QuantileFn, mass

log = logging.getLogger(__name__)

DEFAULT_MAX_EVENTS = 10**7


class EventCapExceeded(RuntimeError):
    """The event queue grew past the configured cap or time budget."""


@dataclass(frozen=True)
class Front:
    id: int
    birth_time: float
    birth_position: float
    speed: float
    left: float
    right: float
    death_time: float = math.inf

    def position(self, t: float) -> float:
        return self.birth_position + self.speed * (t - self.birth_time)

    @property
    def upward(self) -> bool:
        return self.left < self.right

    def alive(self, t: float) -> bool:
        return self.birth_time <= t < self.death_time


@dataclass(frozen=True)
class Interaction:
    time: float
    position: float
    absorbed: tuple[int, ...]
    emitted: tuple[int, ...]


@dataclass(frozen=True)
class RiemannFan:
    """Fronts emitted from one discontinuity, ordered left to right.

    ``states`` runs from the left state to the right state; front ``i``
    separates ``states[i]`` and ``states[i+1]`` and moves with ``speeds[i]``.
    """

    states: tuple[float, ...]
    speeds: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.speeds)


def _chord(flux: PiecewiseLinearFlux, a: float, b: float) -> float:
    return float((flux(a) - flux(b)) / (a - b))


def _fan(flux: PiecewiseLinearFlux, ul: float, ur: float) -> RiemannFan:
    if ul == ur:
        return RiemannFan((ul,), ())
    if ul > ur:
        return RiemannFan((ul, ur), (_chord(flux, ul, ur),))
    states = [ul, *flux.nodes_between(ul, ur).tolist(), ur]
    speeds = [_chord(flux, a, b) for a, b in zip(states[:-1], states[1:])]
    # collinear stretches (only possible around a kept node at 0) travel together
    keep_s, keep_u = [], [states[0]]
    for s, u in zip(speeds, states[1:]):
        if keep_s and s == keep_s[-1]:
            keep_u[-1] = u
        else:
            keep_s.append(s)
            keep_u.append(u)
    return RiemannFan(tuple(keep_u), tuple(keep_s))


def solve_riemann(flux: PiecewiseLinearFlux, ul: float, ur: float, *, on_lattice: bool = True) -> RiemannFan:
    """Entropy solution of the Riemann problem (ul, ur) for a convex broken-line flux.

    A decreasing jump is a single shock at the chord speed; an increasing jump
    opens into one front per flux segment between the two states.
    """
    if ul == ur:
        raise ValueError("Riemann problem needs ul != ur")
    if on_lattice and not (flux.is_node(ul) and flux.is_node(ur)):
        raise ValueError(f"states ({ul}, {ur}) are not on the flux node lattice")
    return _fan(flux, float(ul), float(ur))


def is_admissible(flux: PiecewiseLinearFlux, front: Front) -> bool:
    """Entropy check: a downward jump is always admissible for a convex flux,
    an upward one only if the flux is affine between its states."""
    if front.left >= front.right:
        return True
    return len(_fan(flux, front.left, front.right)) == 1


def snap_to_lattice(u0: PiecewiseConstantFn, flux: PiecewiseLinearFlux) -> tuple[PiecewiseConstantFn, float]:
    """Round every value to the nearest flux node; returns the data and the largest change."""
    if u0.is_zero:
        return u0, 0.0
    snapped = flux.snap(u0.values)
    return PiecewiseConstantFn(u0.breakpoints, snapped), float(np.max(np.abs(snapped - u0.values)))


@dataclass(eq=False)
class FrontTrackingRun:
    """Complete history of a front-tracking computation."""

    flux: PiecewiseLinearFlux
    initial: PiecewiseConstantFn
    source: PiecewiseConstantFn
    t_end: float
    fronts: tuple[Front, ...]
    events: tuple[Interaction, ...]
    initial_order: tuple[int, ...]
    snap_change: float = 0.0
    snapped: bool = True
    _event_times: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self._event_times = np.array([e.time for e in self.events])

    @property
    def event_count(self) -> int:
        return len(self.events)

    @property
    def mass_change(self) -> float:
        """Mass of the evolved data minus mass of the unsnapped source."""
        return mass(self.initial) - mass(self.source)

    def _check_time(self, t: float) -> None:
        if not (0.0 <= t <= self.t_end):
            raise ValueError(f"time {t} outside [0, {self.t_end}]")

    def iter_epochs(self) -> Iterator[tuple[float, list[int]]]:
        """Yield ``(time, ordered active front ids)`` at t = 0 and after each interaction."""
        nxt, prv, head = self._fresh_links()
        yield 0.0, self._walk(head, nxt)
        for ev in self.events:
            head = self._apply(ev, nxt, prv, head)
            yield ev.time, self._walk(head, nxt)

    def _fresh_links(self) -> tuple[list[int], list[int], int]:
        n = len(self.fronts)
        nxt, prv = [-1] * n, [-1] * n
        order = self.initial_order
        for a, b in zip(order[:-1], order[1:]):
            nxt[a], prv[b] = b, a
        return nxt, prv, (order[0] if order else -1)

    @staticmethod
    def _walk(head: int, nxt: list[int]) -> list[int]:
        out = []
        while head >= 0:
            out.append(head)
            head = nxt[head]
        return out

    @staticmethod
    def _apply(ev: Interaction, nxt: list[int], prv: list[int], head: int) -> int:
        left, right = prv[ev.absorbed[0]], nxt[ev.absorbed[-1]]
        chain = [left, *ev.emitted, right]
        for a, b in zip(chain[:-1], chain[1:]):
            if a >= 0:
                nxt[a] = b
            if b >= 0:
                prv[b] = a
        if left < 0:
            head = chain[1]
        return head

    def active_order(self, times: Any) -> list[list[int]]:
        """Ordered active front ids at each requested time (post-event at ties)."""
        ts = np.atleast_1d(np.asarray(times, dtype=float))
        for t in ts:
            self._check_time(float(t))
        order = np.argsort(ts, kind="stable")
        out: list[list[int]] = [[] for _ in ts]
        nxt, prv, head = self._fresh_links()
        e = 0
        for i in order:
            while e < len(self.events) and self.events[e].time <= ts[i]:
                head = self._apply(self.events[e], nxt, prv, head)
                e += 1
            out[i] = self._walk(head, nxt)
        return out

    def active_fronts(self, t: float) -> list[Front]:
        return [self.fronts[i] for i in self.active_order([t])[0]]

    def front_count(self, t: float) -> int:
        return len(self.active_order([t])[0])

    def _profile(self, ids: list[int], t: float) -> PiecewiseConstantFn:
        if not ids:
            return PiecewiseConstantFn.zero()
        fr = [self.fronts[i] for i in ids]
        x = np.array([f.position(t) for f in fr])
        x = np.maximum.accumulate(x)
        vals = np.array([f.right for f in fr[:-1]])
        return PiecewiseConstantFn(x, vals)

    def snapshot(self, t: float) -> PiecewiseConstantFn:
        """Profile at time ``t``; the jumps are exactly the active fronts."""
        return self._profile(self.active_order([t])[0], t)

    def snapshots(self, times: Any) -> list[PiecewiseConstantFn]:
        ts = np.atleast_1d(np.asarray(times, dtype=float))
        return [self._profile(ids, float(t)) for ids, t in zip(self.active_order(ts), ts)]

    def summary(self) -> dict:
        return {
            "events": self.event_count,
            "fronts_created": len(self.fronts),
            "final_fronts": self.front_count(self.t_end),
            "t_end": self.t_end,
            "snapped": self.snapped,
            "snap_change": self.snap_change,
            "mass_change": self.mass_change,
        }


def run(
    u0: PiecewiseConstantFn,
    flux: PiecewiseLinearFlux,
    t_end: float,
    *,
    snap: bool = True,
    max_events: int = DEFAULT_MAX_EVENTS,
    max_seconds: float | None = None,
) -> FrontTrackingRun:
    """Track all fronts of the entropy solution from ``u0`` up to ``t_end``.

    With ``snap`` the initial values are first rounded to the nearest flux
    node; otherwise off-lattice states are kept and fans run through the
    lattice nodes between them.
    """
    if not t_end >= 0:
        raise ValueError("t_end must be nonnegative")
    data, change = snap_to_lattice(u0, flux) if snap else (u0, 0.0)
    if change:
        log.debug("snapped initial data, largest change %.3g", change)

    bt: list[float] = []
    bx: list[float] = []
    sp: list[float] = []
    ul: list[float] = []
    ur: list[float] = []
    dt: list[float] = []
    nxt: list[int] = []
    prv: list[int] = []

    def emit(x: float, t: float, left: float, right: float) -> list[int]:
        fan = _fan(flux, left, right)
        ids = []
        for s, a, b in zip(fan.speeds, fan.states[:-1], fan.states[1:]):
            ids.append(len(bt))
            bt.append(t)
            bx.append(x)
            sp.append(s)
            ul.append(a)
            ur.append(b)
            dt.append(math.inf)
            nxt.append(-1)
            prv.append(-1)
        return ids

    order: list[int] = []
    if not data.is_zero:
        padded = np.concatenate(([0.0], data.values, [0.0]))
        for x, a, b in zip(data.breakpoints, padded[:-1], padded[1:]):
            order.extend(emit(float(x), 0.0, float(a), float(b)))
    for a, b in zip(order[:-1], order[1:]):
        nxt[a], prv[b] = b, a

    width = (data.support[1] - data.support[0]) if not data.is_zero else 1.0
    span = width + (max(abs(flux.slope_min), abs(flux.slope_max)) * t_end)
    xtol = 1e-12 * max(span, 1e-300)

    def pos(i: int, t: float) -> float:
        return bx[i] + sp[i] * (t - bt[i])

    heap: list[tuple[float, int, int]] = []

    def schedule(a: int, b: int, now: float) -> None:
        if a < 0 or b < 0:
            return
        ds = sp[a] - sp[b]
        if ds <= 0:
            return
        gap = pos(b, now) - pos(a, now)
        tc = now + max(gap, 0.0) / ds
        if tc <= t_end:
            heapq.heappush(heap, (tc, a, b))

    for a, b in zip(order[:-1], order[1:]):
        schedule(a, b, 0.0)

    events: list[Interaction] = []
    clock = _time.monotonic()
    while heap:
        tc, a, b = heapq.heappop(heap)
        if dt[a] != math.inf or dt[b] != math.inf or nxt[a] != b:
            continue
        x = 0.5 * (pos(a, tc) + pos(b, tc))
        L, R = a, b
        while prv[L] >= 0 and abs(pos(prv[L], tc) - x) <= xtol:
            L = prv[L]
        while nxt[R] >= 0 and abs(pos(nxt[R], tc) - x) <= xtol:
            R = nxt[R]
        absorbed = [L]
        while absorbed[-1] != R:
            absorbed.append(nxt[absorbed[-1]])
        for i in absorbed:
            dt[i] = tc
        left_nb, right_nb = prv[L], nxt[R]
        new = emit(x, tc, ul[L], ur[R])
        chain = [left_nb, *new, right_nb]
        for p, q in zip(chain[:-1], chain[1:]):
            if p >= 0:
                nxt[p] = q
            if q >= 0:
                prv[q] = p
        schedule(chain[0], chain[1], tc)
        if new:
            schedule(chain[-2], chain[-1], tc)
        events.append(Interaction(tc, x, tuple(absorbed), tuple(new)))
        if len(events) > max_events:
            raise EventCapExceeded(f"more than {max_events} interactions before t={t_end}")
        if max_seconds is not None and len(events) % 1024 == 0 and _time.monotonic() - clock > max_seconds:
            raise EventCapExceeded(f"front tracking exceeded {max_seconds} s")

    fronts = tuple(Front(i, bt[i], bx[i], sp[i], ul[i], ur[i], dt[i]) for i in range(len(bt)))
    return FrontTrackingRun(
        flux=flux,
        initial=data,
        source=u0,
        t_end=float(t_end),
        fronts=fronts,
        events=tuple(events),
        initial_order=tuple(order),
        snap_change=change,
        snapped=snap,
    )


def snapshot(run_data: FrontTrackingRun, t: float) -> PiecewiseConstantFn:
    return run_data.snapshot(t)


# -- oracles ------------------------------------------------------------------


def hopf_lax_primitive(
    U0: PiecewiseLinearFn, cp: ConjugatePair, x: Any, t: float, *, return_argmin: bool = False
) -> Any:
    """min over y of t f*((x - y)/t) + U0(y), evaluated exactly.

    For a broken-line flux the objective is piecewise linear in y and the
    minimum sits at a breakpoint of U0 or at a kink y = x - sigma_j t. For an
    analytic flux it is convex on every piece of U0, where the minimiser is
    y = x - t f'(slope), clipped to the piece.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if t == 0:
        val = np.asarray(U0(xa), dtype=float)
        return (val, xa.copy()) if return_argmin else (val if np.ndim(x) else float(val[0]))
    b = U0.breakpoints
    X = xa[:, None]
    if cp.is_piecewise_linear:
        # kinks: p = sigma_j exactly
        y_k = X - cp.kinks[None, :] * t
        obj_k = t * cp.kink_values[None, :] + U0(y_k)
        y_b = np.broadcast_to(b[None, :], (xa.size, b.size))
        p_b = (X - y_b) / t
        obj_b = t * cp(p_b) + U0(y_b)
        ys = np.concatenate((y_k, y_b), axis=1)
        obj = np.concatenate((obj_k, obj_b), axis=1)
    else:
        f = cp.flux
        slopes = U0.all_slopes
        lo = np.concatenate(([-np.inf], b))
        hi = np.concatenate((b, [np.inf]))
        y_s = np.clip(X - t * np.asarray(f.derivative(slopes))[None, :], lo[None, :], hi[None, :])
        y_b = np.broadcast_to(b[None, :], (xa.size, b.size))
        ys = np.concatenate((y_s, y_b), axis=1)
        obj = t * cp((X - ys) / t) + U0(ys)
    k = np.argmin(obj, axis=1)
    rows = np.arange(xa.size)
    val = obj[rows, k]
    if return_argmin:
        return val, ys[rows, k]
    return val if np.ndim(x) else float(val[0])


def inverse_primitive_formula(Q0: QuantileFn, cp: ConjugatePair, gamma: Any, t: float) -> Any:
    """max over 0 <= w <= gamma of t f~((gamma - w)/t) + Q0(w).

    Valid for nonnegative data with connected support and a flux whose minimum
    is f(0) = 0. Candidates are the knots of Q0, the kink preimages of f~ and,
    for analytic fluxes, the stationary point on every segment of Q0.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    m = Q0.mass
    if np.any(g < -1e-12 * m) or np.any(g > m * (1 + 1e-12)):
        raise ValueError(f"gamma outside [0, {m}]")
    g = np.clip(g, 0.0, m)
    G = g[:, None]
    knots = Q0.knots
    cands = [np.zeros_like(G), G, np.broadcast_to(knots[None, :], (g.size, knots.size))]
    if cp.is_piecewise_linear:
        cands.append(G - t * cp.inverse_kinks[None, :])
    else:
        f = cp.flux
        dens = (knots[1:] - knots[:-1]) / (Q0.x_end - Q0.x_start)
        qstar = dens * f.derivative(dens) - f(dens)
        w = G - t * qstar[None, :]
        cands.append(np.clip(w, knots[None, :-1], knots[None, 1:]))
    W = np.concatenate(cands, axis=1)
    valid = (W >= 0.0) & (W <= G)
    Wc = np.clip(W, 0.0, G)
    q = np.maximum((G - Wc) / t, 0.0)
    obj = t * cp.inverse(q) + Q0(Wc)
    obj = np.where(valid, obj, -np.inf)
    val = np.max(obj, axis=1)
    return val if np.ndim(gamma) else float(val[0])
