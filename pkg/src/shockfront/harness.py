"""Grid-refinement studies: run front tracking on Δx = 2^-k, measure the error
against a reference in L1, W1, W_p and W_inf, and tabulate observed orders."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import metrics
from .flux import Burgers, Flux, PiecewiseLinearFlux, flux_from_dict, interpolate_flux, oleinik_a_sup
from .piecewise import PiecewiseConstantFn, from_json_dict, lip_plus, project_to_grid, total_variation
from .reference import ShockSolution, WedgeSolution
from .solver import EventCapExceeded, run

log = logging.getLogger(__name__)

EOC_FLOOR = 1e-14
SLOPE_LEVELS = 4

_ANALYTIC = {"wedge": WedgeSolution, "decreasing-step": ShockSolution}


class ConfigError(ValueError):
    """Invalid study configuration."""


# -- configuration ------------------------------------------------------------------


@dataclass(frozen=True)
class StudyConfig:
    flux: dict = field(default_factory=lambda: {"type": "burgers"})
    initial: dict = field(default_factory=lambda: {"kind": "wedge"})
    lam: float = 1.0
    k_min: int = 4
    k_max: int = 9
    times: tuple[float, ...] = (0.5, 2.0)
    ps: tuple[float, ...] = (2.0, 4.0)
    reference: str = "auto"
    snap: bool = True
    max_events: int = 10**7
    max_seconds: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> StudyConfig:
        if not isinstance(d, dict):
            raise ConfigError("study config must be a JSON object")
        known = {"flux", "initial", "lambda", "k_min", "k_max", "times", "p", "reference", "snap", "max_events", "max_seconds"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            cfg = cls(
                flux=dict(d.get("flux", {"type": "burgers"})),
                initial=dict(d.get("initial", {"kind": "wedge"})),
                lam=float(d.get("lambda", 1.0)),
                k_min=int(d.get("k_min", 4)),
                k_max=int(d.get("k_max", 9)),
                times=tuple(float(t) for t in d.get("times", (0.5, 2.0))),
                ps=tuple(_parse_p(p) for p in d.get("p", (2.0, 4.0))),
                reference=str(d.get("reference", "auto")),
                snap=bool(d.get("snap", True)),
                max_events=int(d.get("max_events", 10**7)),
                max_seconds=None if d.get("max_seconds") is None else float(d["max_seconds"]),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if not self.k_min < self.k_max:
            raise ConfigError("need k_min < k_max")
        if not self.times or any(not t > 0 for t in self.times):
            raise ConfigError("times must be positive")
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        if any(not p >= 1 for p in self.ps):
            raise ConfigError("every p must be at least 1")
        if self.reference not in ("auto", "analytic", "fine"):
            raise ConfigError(f"unknown reference mode {self.reference!r}")
        try:
            flux = flux_from_dict(self.flux)
            build_initial(self.initial)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.reference == "analytic" and not self.has_analytic_reference(flux):
            raise ConfigError("analytic reference needs Burgers flux with wedge or decreasing-step data")

    def has_analytic_reference(self, flux: Flux | None = None) -> bool:
        flux = flux or flux_from_dict(self.flux)
        return isinstance(flux, Burgers) and self.initial.get("kind") in _ANALYTIC

    @property
    def reference_mode(self) -> str:
        if self.reference == "auto":
            return "analytic" if self.has_analytic_reference() else "fine"
        return self.reference

    def to_dict(self) -> dict:
        return {
            "flux": self.flux,
            "initial": self.initial,
            "lambda": self.lam,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "times": list(self.times),
            "p": [("inf" if math.isinf(p) else p) for p in self.ps],
            "reference": self.reference,
            "snap": self.snap,
            "max_events": self.max_events,
            "max_seconds": self.max_seconds,
        }


def _parse_p(p: Any) -> float:
    if isinstance(p, str) and p.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(p)


def build_initial(desc: dict) -> Any:
    """Initial datum from a descriptor; the result exposes ``support`` and ``cdf``.

    Step data ("staircase" on equal cells, "custom" on given breakpoints) is
    rescaled in x to mass 1 unless ``"normalize": false``.
    """
    kind = desc.get("kind")
    if kind in _ANALYTIC:
        return _ANALYTIC[kind](0.0)
    if kind == "staircase":
        values = np.asarray(desc.get("values", (1.0, 2.0, 1.0)), dtype=float)
        u0 = PiecewiseConstantFn.from_cells(float(desc.get("left", 0.0)), float(desc.get("width", 1.0)), values)
    elif kind == "custom":
        u0 = PiecewiseConstantFn(desc["breakpoints"], desc["values"])
    else:
        raise ConfigError(f"unknown initial data kind {kind!r}")
    if u0.is_zero:
        raise ConfigError("initial data is identically zero")
    if desc.get("normalize", True):
        m = u0.mass
        if not m > 0:
            raise ConfigError("cannot normalize data with nonpositive mass")
        a = u0.breakpoints[0]
        u0 = PiecewiseConstantFn(a + (u0.breakpoints - a) / m, u0.values)
    return u0


def _lip_plus_initial(u0: Any) -> float:
    return lip_plus(u0) if isinstance(u0, PiecewiseConstantFn) else float(u0.lip_plus)


def _level_flux(cfg: StudyConfig, dx: float, M: float) -> PiecewiseLinearFlux:
    f = flux_from_dict(cfg.flux)
    if isinstance(f, PiecewiseLinearFlux):
        return f
    return interpolate_flux(f, cfg.lam * dx, M)


# -- error tables ---------------------------------------------------------------------


def eoc(errors: Sequence[float]) -> list[float]:
    """Observed orders log2(e_k / e_{k+1}) followed by the least-squares slope.

    Levels are assumed to halve Δx. Entries at or below 1e-14 are skipped:
    the EOCs touching them are nan and they are left out of the fit.
    """
    e = np.asarray(errors, dtype=float)
    if e.size < 2:
        raise ValueError("need at least two levels")
    ok = e > EOC_FLOOR
    out = []
    for a, b, oa, ob in zip(e[:-1], e[1:], ok[:-1], ok[1:]):
        out.append(math.log2(a / b) if (oa and ob) else math.nan)
    dx = 2.0 ** -np.arange(e.size)
    out.append(ls_slope(dx, e))
    return out


def ls_slope(dx: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log e against log Δx over the usable entries."""
    dx, e = np.asarray(dx, dtype=float), np.asarray(errors, dtype=float)
    ok = np.isfinite(e) & (e > EOC_FLOOR)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(dx[ok]), np.log(e[ok]), 1)[0])


def metric_names(ps: Sequence[float]) -> list[str]:
    return ["l1", "w1", *[f"wp_{_p_label(p)}" for p in ps], "winf"]


def _p_label(p: float) -> str:
    return "inf" if math.isinf(p) else format(p, "g")


@dataclass
class LevelRow:
    k: int
    dx: float
    errors: dict[str, float]
    events: int = 0
    failed: str | None = None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "dx": self.dx,
            "errors": {m: _json_float(v) for m, v in self.errors.items()},
            "events": self.events,
            "failed": self.failed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> LevelRow:
        return cls(
            k=int(d["k"]),
            dx=float(d["dx"]),
            errors={m: (math.nan if v is None else float(v)) for m, v in d["errors"].items()},
            events=int(d.get("events", 0)),
            failed=d.get("failed"),
        )


@dataclass
class EocTable:
    """Errors per refinement level at one time, with observed orders."""

    time: float
    ps: tuple[float, ...]
    rows: list[LevelRow] = field(default_factory=list)
    note: str = ""

    @property
    def metrics(self) -> list[str]:
        return metric_names(self.ps)

    def column(self, metric: str) -> np.ndarray:
        return np.array([r.errors.get(metric, math.nan) for r in self.rows], dtype=float)

    @property
    def dx(self) -> np.ndarray:
        return np.array([r.dx for r in self.rows], dtype=float)

    def eoc(self, metric: str) -> list[float]:
        """EOC_k between row k and row k+1; nan for the last row and undefined pairs."""
        e = self.column(metric)
        if e.size < 2:
            return [math.nan] * e.size
        return [*eoc(e)[:-1], math.nan]

    def slope(self, metric: str, levels: int = SLOPE_LEVELS) -> float:
        return ls_slope(self.dx[-levels:], self.column(metric)[-levels:])

    @property
    def failed(self) -> list[int]:
        return [r.k for r in self.rows if r.failed]

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "p": [_p_label(p) for p in self.ps],
            "rows": [r.to_dict() for r in self.rows],
            "eoc": {m: [_json_float(v) for v in self.eoc(m)] for m in self.metrics},
            "slope": {m: _json_float(self.slope(m)) for m in self.metrics},
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> EocTable:
        return cls(
            time=float(d["time"]),
            ps=tuple(_parse_p(p) for p in d["p"]),
            rows=[LevelRow.from_dict(r) for r in d["rows"]],
            note=d.get("note", ""),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EocTable):
            return NotImplemented
        return json.dumps(self.to_dict(), sort_keys=True) == json.dumps(other.to_dict(), sort_keys=True)


def _json_float(x: float) -> float | None:
    return None if not math.isfinite(x) else float(x)


def _fmt(x: float) -> str:
    return "" if not math.isfinite(x) else format(x, ".17g")


def _csv_rows(table: EocTable, prefix: list[str]) -> list[list[str]]:
    ms = table.metrics
    eocs = {m: table.eoc(m) for m in ms}
    out = []
    for i, r in enumerate(table.rows):
        out.append([*prefix, str(r.k), _fmt(r.dx), *[_fmt(r.errors.get(m, math.nan)) for m in ms], *[_fmt(eocs[m][i]) for m in ms]])
    if table.rows:
        out.append([*prefix, "ls", "", *[""] * len(ms), *[_fmt(table.slope(m)) for m in ms]])
    return out


def _csv_header(ms: list[str]) -> list[str]:
    return ["k", "dx", *ms, *[f"eoc_{m}" for m in ms]]


def to_csv(table: EocTable) -> str:
    """Header, one line per level, and a final ``ls`` line with the fitted slopes."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(_csv_header(table.metrics))
    w.writerows(_csv_rows(table, []))
    return buf.getvalue()


def emit(table: EocTable, fmt: str, path: str | os.PathLike | None) -> str:
    """Write one table as CSV or JSON; returns the text. ``path=None`` only renders."""
    if fmt == "csv":
        text = to_csv(table)
    elif fmt == "json":
        text = json.dumps(table.to_dict(), indent=2) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    _write(text, path)
    return text


def _write(text: str, path: str | os.PathLike | None) -> None:
    if path is None:
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {os.fspath(path)!r}: {exc.strerror or exc}") from exc


# -- theorem constants ------------------------------------------------------------------


def w1_rate_constant(
    flux: Flux,
    *,
    t: float,
    dx: float,
    lam: float,
    M: float,
    support_length: float,
    tv: float,
    lip_constant: float,
) -> float:
    """C~(t) = C(t) (TV + t lam^2 K(t) sup f'') + K(t) C / 8 for the W1 bound C~(t) Δx^2.

    K(t) = |supp u0| + 2Δx + t ||f||_Lip on [-M - δ, M + δ]; C(t) = exp(||f'||_Lip C t).
    """
    delta = lam * dx
    K = support_length + 2.0 * dx + flux.lipschitz(-M - delta, M + delta) * t
    f2 = flux.max_second_derivative(-M, M)
    Ct = math.exp(f2 * lip_constant * t)
    return Ct * (tv + t * lam**2 * K * f2) + K * lip_constant / 8.0


def winf_rate_constant(flux: Flux, *, t: float, M: float, delta: float) -> float:
    """L(t) = 1 + t max |f''| over [0, M + δ] for the W_inf bound L(t) Δx."""
    return 1.0 + t * flux.max_second_derivative(0.0, M + delta)


# -- studies ----------------------------------------------------------------------------------


@dataclass
class StudyResult:
    config: StudyConfig
    tables: list[EocTable]
    reference: str
    notes: list[str] = field(default_factory=list)

    @property
    def failed_levels(self) -> list[int]:
        return sorted({k for t in self.tables for k in t.failed})

    def table(self, t: float) -> EocTable:
        for tab in self.tables:
            if tab.time == t:
                return tab
        raise KeyError(t)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "reference": self.reference,
            "notes": self.notes,
            "tables": [t.to_dict() for t in self.tables],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        ms = metric_names(self.config.ps)
        w.writerow(["t", *_csv_header(ms)])
        for tab in self.tables:
            w.writerows(_csv_rows(tab, [_fmt(tab.time)]))
        return buf.getvalue()


def emit_study(result: StudyResult, fmt: str, path: str | os.PathLike | None) -> str:
    """Like ``emit`` for a whole study; the CSV gains a leading ``t`` column."""
    if fmt == "csv":
        text = result.to_csv()
    elif fmt == "json":
        text = json.dumps(result.to_dict(), indent=2) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    _write(text, path)
    return text


def _errors(u: PiecewiseConstantFn, ref: Any, ps: Sequence[float]) -> dict[str, float]:
    out = {"l1": metrics.l1(u, ref), "w1": metrics.w1(u, ref)}
    nonneg = u.is_nonnegative() and (not isinstance(ref, PiecewiseConstantFn) or ref.is_nonnegative())
    for p in ps:
        out[f"wp_{_p_label(p)}"] = metrics.wp(u, ref, p) if nonneg else math.nan
    out["winf"] = metrics.winf(u, ref) if nonneg else math.nan
    return out


def simulate_level(cfg: StudyConfig, k: int):
    """Projected data, interpolated flux and the front-tracking run for level ``k``."""
    dx = 2.0**-k
    u0 = build_initial(cfg.initial)
    M = float(u0.sup_norm)
    flux = _level_flux(cfg, dx, M)
    u0dx = project_to_grid(u0, dx)
    result = run(u0dx, flux, max(cfg.times), snap=cfg.snap, max_events=cfg.max_events, max_seconds=cfg.max_seconds)
    return result


def _level_task(cfg_dict: dict, k: int, ref_payload: dict) -> dict:
    cfg = StudyConfig.from_dict(cfg_dict)
    dx = 2.0**-k
    names = metric_names(cfg.ps)
    nan_errors = {m: math.nan for m in names}
    try:
        r = simulate_level(cfg, k)
    except EventCapExceeded as exc:
        return {t: LevelRow(k, dx, dict(nan_errors), failed=f"event cap: {exc}").to_dict() for t in cfg.times}
    rows = {}
    snaps = r.snapshots(list(cfg.times))
    for t, snap in zip(cfg.times, snaps):
        ref = _reference_at(ref_payload, t)
        try:
            errs = _errors(snap, ref, cfg.ps)
            rows[t] = LevelRow(k, dx, errs, events=r.event_count).to_dict()
        except ValueError as exc:
            rows[t] = LevelRow(k, dx, dict(nan_errors), events=r.event_count, failed=str(exc)).to_dict()
    return rows


def _reference_at(payload: dict, t: float) -> Any:
    if payload["mode"] == "analytic":
        return _ANALYTIC[payload["kind"]](t)
    return from_json_dict(payload["snapshots"][repr(t)])


def _workers(n_tasks: int) -> int:
    env = os.environ.get("SHOCKFRONT_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            log.warning("ignoring malformed SHOCKFRONT_THREADS=%r", env)
    return max(1, min(cap, n_tasks))


def run_study(cfg: StudyConfig) -> StudyResult:
    """Refinement study over k_min..k_max; rows are always ordered by k."""
    cfg.validate()
    mode = cfg.reference_mode
    notes = []
    u0 = build_initial(cfg.initial)
    lp = _lip_plus_initial(u0)
    if not math.isfinite(lp):
        notes.append("initial data has unbounded Lip+; the W1 rate theorem does not cover this study")
    M = float(u0.sup_norm)
    try:
        a_sup = oleinik_a_sup(_level_flux(cfg, 2.0**-cfg.k_max, M), M)
        notes.append(f"oleinik sup a(v) on (0, M]: {a_sup:.6g}")
    except ValueError as exc:
        notes.append(f"oleinik condition not evaluated: {exc}")

    if mode == "analytic":
        payload = {"mode": "analytic", "kind": cfg.initial["kind"]}
    else:
        k_ref = cfg.k_max + 3
        ref_run = simulate_level(cfg, k_ref)
        snaps = ref_run.snapshots(list(cfg.times))
        payload = {"mode": "fine", "snapshots": {repr(t): s.to_dict() for t, s in zip(cfg.times, snaps)}}
        notes.append(f"fine front-tracking reference at dx = 2^-{k_ref}")

    levels = list(range(cfg.k_min, cfg.k_max + 1))
    cd = cfg.to_dict()
    nw = _workers(len(levels))
    if nw == 1:
        results = [_level_task(cd, k, payload) for k in levels]
    else:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            results = list(ex.map(_level_task, [cd] * len(levels), levels, [payload] * len(levels)))
    tables = []
    for t in cfg.times:
        rows = [LevelRow.from_dict(res[t]) for res in results]
        tables.append(EocTable(time=t, ps=cfg.ps, rows=rows, note="; ".join(notes)))
    for tab in tables:
        for r in tab.rows:
            if r.failed:
                log.warning("level k=%d at t=%g failed: %s", r.k, tab.time, r.failed)
    return StudyResult(config=cfg, tables=tables, reference=mode, notes=notes)


def initial_summary(cfg: StudyConfig) -> dict:
    """Quantities of the initial datum that enter the theorem constants."""
    u0 = build_initial(cfg.initial)
    a, b = u0.support
    if isinstance(u0, PiecewiseConstantFn):
        tv = total_variation(u0)
    else:
        # analytic data: TV of a fine projection converges from below
        tv = total_variation(project_to_grid(u0, 2.0**-16))
    return {"M": float(u0.sup_norm), "support_length": b - a, "tv": tv, "lip_plus": _lip_plus_initial(u0), "mass": float(u0.mass)}
