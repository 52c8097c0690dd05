"""Closed-form entropy solutions of Burgers' equation used as references.

Each solution object exposes the interface the distance routines expect from
an analytic density: ``density``, ``cdf``, ``quantile(xi, side)``, ``knots``
(points where the density is not smooth), ``quantile_knots``, ``mass``,
``support``, ``sup_norm`` and ``lip_plus``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np


@dataclass(frozen=True)
class WedgeSolution:
    """u0 = 2x on [0, 1): a rarefaction ramp closed by one shock at sqrt(1 + 2t)."""

    t: float = 0.0

    @property
    def shock(self) -> float:
        return math.sqrt(1.0 + 2.0 * self.t)

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, self.shock)

    @property
    def knots(self) -> np.ndarray:
        return np.array([0.0, self.shock])

    @property
    def quantile_knots(self) -> np.ndarray:
        return np.array([0.0, 1.0])

    @property
    def mass(self) -> float:
        return 1.0

    @property
    def sup_norm(self) -> float:
        return 2.0 * self.shock / (1.0 + 2.0 * self.t)

    @property
    def lip_plus(self) -> float:
        return 2.0 / (1.0 + 2.0 * self.t)

    def density(self, x: Any) -> Any:
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0.0) & (x < self.shock), 2.0 * x / (1.0 + 2.0 * self.t), 0.0)

    __call__ = density

    def cdf(self, x: Any) -> Any:
        x = np.clip(np.asarray(x, dtype=float), 0.0, self.shock)
        return np.minimum(x * x / (1.0 + 2.0 * self.t), 1.0)

    def quantile(self, xi: Any, side: str = "right") -> Any:
        xi = np.clip(np.asarray(xi, dtype=float), 0.0, 1.0)
        return np.sqrt(xi * (1.0 + 2.0 * self.t))


@dataclass(frozen=True)
class ShockSolution:
    """u0 = x + 3/2 on [-3/2, -1/2), 1 on [-1/2, 0), 0 elsewhere (mass 1, Lip+ = 1).

    The plateau ends in a shock moving at speed 1/2; the rarefaction ramp
    catches it at t = 1, x = 1/2, after which the shock slows down.
    """

    t: float = 0.0

    @property
    def _caught(self) -> bool:
        return self.t >= 1.0

    @property
    def shock(self) -> float:
        if self._caught:
            return -1.5 + math.sqrt(2.0 * (1.0 + self.t))
        return 0.5 * self.t

    @property
    def fan_edge(self) -> float:
        return self.shock if self._caught else -0.5 + self.t

    @property
    def support(self) -> tuple[float, float]:
        return (-1.5, self.shock)

    @property
    def knots(self) -> np.ndarray:
        return np.unique([-1.5, self.fan_edge, self.shock])

    @property
    def quantile_knots(self) -> np.ndarray:
        if self._caught:
            return np.array([0.0, 1.0])
        return np.array([0.0, 0.5 * (1.0 + self.t), 1.0])

    @property
    def mass(self) -> float:
        return 1.0

    @property
    def sup_norm(self) -> float:
        return math.sqrt(2.0 / (1.0 + self.t)) if self._caught else 1.0

    @property
    def lip_plus(self) -> float:
        return 1.0 / (1.0 + self.t)

    def density(self, x: Any) -> Any:
        x = np.asarray(x, dtype=float)
        inside = (x >= -1.5) & (x < self.shock)
        ramp = np.minimum((x + 1.5) / (1.0 + self.t), 1.0)
        return np.where(inside, ramp, 0.0)

    __call__ = density

    def cdf(self, x: Any) -> Any:
        x = np.clip(np.asarray(x, dtype=float), -1.5, self.shock)
        e = self.fan_edge
        y = np.minimum(x, e) + 1.5
        out = y * y / (2.0 * (1.0 + self.t)) + np.maximum(x - e, 0.0)
        return np.minimum(out, 1.0)

    def quantile(self, xi: Any, side: str = "right") -> Any:
        xi = np.clip(np.asarray(xi, dtype=float), 0.0, 1.0)
        fan = -1.5 + np.sqrt(2.0 * (1.0 + self.t) * xi)
        if self._caught:
            return fan
        head = 0.5 * (1.0 + self.t)
        return np.where(xi <= head, fan, xi - head + self.fan_edge)


def exact_wedge_burgers(x: Any, t: float) -> Any:
    """Entropy solution of Burgers' equation from u0 = 2x on [0, 1)."""
    return WedgeSolution(t).density(x)


def exact_shock_burgers(x: Any, t: float) -> Any:
    """Entropy solution of Burgers' equation from the ramp-plateau-drop data of ``ShockSolution``."""
    return ShockSolution(t).density(x)


class ExactEvolution:
    """Duck-types the parts of a front-tracking run the stability checks read."""

    def __init__(self, flux: Any, family: type, **kwargs: Any) -> None:
        self.flux = flux
        self._family = family
        self._kwargs = kwargs
        self.initial = family(0.0, **kwargs)

    def snapshot(self, t: float) -> Any:
        return self._family(t, **self._kwargs)


class HopfLaxProfile:
    """Entropy solution at time ``t`` for step initial data and an analytic flux.

    The primitive comes from the Hopf-Lax formula and the quantile from the
    max formula for the inverse primitive, so only the interface used by
    ``w1``/``winf``/``primitive_sup`` is provided (no ``density``). The data
    must be nonnegative with connected support and the flux minimal at 0.
    """

    def __init__(self, initial: Any, flux: Any, t: float) -> None:
        from .flux import legendre_transform
        from .piecewise import primitive, pseudo_inverse

        if not t > 0:
            raise ValueError("t must be positive")
        self.t = t
        self._cp = legendre_transform(flux)
        self._U0 = primitive(initial)
        self._Q0 = pseudo_inverse(self._U0)
        self.mass = float(initial.mass)
        self.quantile_knots = self._Q0.knots
        self.knots = np.unique(self.quantile(self.quantile_knots))
        self.support = (float(self.knots[0]), float(self.knots[-1]))

    def cdf(self, x: Any) -> Any:
        from .solver import hopf_lax_primitive

        return hopf_lax_primitive(self._U0, self._cp, x, self.t)

    def quantile(self, xi: Any, side: str = "right") -> Any:
        from .solver import inverse_primitive_formula

        xi = np.asarray(xi, dtype=float)
        out = inverse_primitive_formula(self._Q0, self._cp, xi.ravel(), self.t)
        return np.asarray(out).reshape(xi.shape)


class HopfLaxEvolution:
    """Exact evolution of step data under an analytic flux, shaped like a run."""

    def __init__(self, initial: Any, flux: Any) -> None:
        self.initial = initial
        self.flux = flux

    def snapshot(self, t: float) -> Any:
        return self.initial if t == 0 else HopfLaxProfile(self.initial, self.flux, t)
