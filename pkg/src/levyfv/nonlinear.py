"""Diffusion nonlinearities, convective fluxes and monotone numerical fluxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Diffusion",
    "Flux",
    "Nonlinearity",
    "NumericalFlux",
    "eval_flux",
    "DIFFUSIONS",
    "FLUXES",
    "NUMERICAL_FLUXES",
]

DIFFUSIONS = ("identity", "porous", "stairs", "none")
FLUXES = ("none", "linear", "burgers")
NUMERICAL_FLUXES = ("engquist_osher", "lax_friedrichs", "godunov")


@dataclass(frozen=True)
class Diffusion:
    """Non-decreasing Lipschitz ``A`` with ``A(0) = 0``.

    ``stairs`` is constant (zero) on ``[-1/2, 1/2]`` and has slope one
    outside, so the equation degenerates on a set of positive measure.
    """

    kind: str = "identity"
    m: float = 1.0

    def __post_init__(self):
        if self.kind not in DIFFUSIONS:
            raise ValueError(f"unknown diffusion {self.kind!r}")
        if self.kind == "porous" and not self.m >= 1.0:
            raise ValueError("porous exponent must be at least 1")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "identity":
            return u.copy()
        if self.kind == "porous":
            if self.m == 1.0:
                return u.copy()
            if self.m == 2.0:
                return u * np.abs(u)
            return u * np.abs(u) ** (self.m - 1.0)
        if self.kind == "stairs":
            return np.sign(u) * np.maximum(np.abs(u) - 0.5, 0.0)
        return np.zeros_like(u)

    def lipschitz(self, bound: float) -> float:
        """Lipschitz constant of ``A`` on ``[-bound, bound]``."""
        if self.kind in ("identity", "stairs"):
            return 1.0
        if self.kind == "porous":
            return self.m * max(bound, 0.0) ** (self.m - 1.0) if self.m > 1.0 else 1.0
        return 0.0

    @property
    def active(self) -> bool:
        return self.kind != "none"


@dataclass(frozen=True)
class Flux:
    """Convective flux ``f`` with ``f(0) = 0``; the same flux acts on every axis."""

    kind: str = "none"
    speed: float = 1.0

    def __post_init__(self):
        if self.kind not in FLUXES:
            raise ValueError(f"unknown flux {self.kind!r}")

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "linear":
            return self.speed * u
        if self.kind == "burgers":
            return 0.5 * u * u
        return np.zeros_like(u)

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "linear":
            return np.full_like(u, self.speed)
        if self.kind == "burgers":
            return u.copy()
        return np.zeros_like(u)

    def lipschitz(self, bound: float) -> float:
        if self.kind == "linear":
            return abs(self.speed)
        if self.kind == "burgers":
            return max(bound, 0.0)
        return 0.0

    @property
    def active(self) -> bool:
        return self.kind != "none"


@dataclass(frozen=True)
class Nonlinearity:
    A: Diffusion = Diffusion()
    f: Flux = Flux()


@dataclass(frozen=True)
class NumericalFlux:
    """Two-point monotone flux.

    ``c`` is the Lax-Friedrichs viscosity; ``None`` means "use the flux's
    Lipschitz constant on the data range".
    """

    kind: str = "engquist_osher"
    c: float | None = None

    def __post_init__(self):
        if self.kind not in NUMERICAL_FLUXES:
            raise ValueError(f"unknown numerical flux {self.kind!r}")


def _godunov(f: Flux, a, b):
    if f.kind == "none":
        return np.zeros_like(a)
    if f.kind == "linear":
        # monotone f: upwind value
        return np.where(f.speed >= 0, f(a), f(b))
    # burgers: convex with minimum at 0
    fa, fb = f(a), f(b)
    lo = np.minimum(fa, fb)
    contains_zero = (np.minimum(a, b) <= 0) & (np.maximum(a, b) >= 0)
    rising = np.where(contains_zero, 0.0, lo)
    falling = np.maximum(fa, fb)
    return np.where(a <= b, rising, falling)


def eval_flux(flux: NumericalFlux, f: Flux, a, b, c: float | None = None):
    """Numerical flux ``f_hat(a, b)`` (vectorised)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if flux.kind == "engquist_osher":
        if f.kind == "burgers":
            ap = np.maximum(a, 0.0)
            bm = np.minimum(b, 0.0)
            return 0.5 * ap * ap + 0.5 * bm * bm
        if f.kind == "linear":
            return max(f.speed, 0.0) * a + min(f.speed, 0.0) * b
        return np.zeros(np.broadcast(a, b).shape)
    if flux.kind == "lax_friedrichs":
        visc = flux.c if flux.c is not None else c
        if visc is None:
            visc = f.lipschitz(float(max(np.max(np.abs(a), initial=0.0), np.max(np.abs(b), initial=0.0))))
        return 0.5 * (f(a) + f(b)) - 0.5 * visc * (b - a)
    return _godunov(f, a, b)
