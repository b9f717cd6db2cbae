"""Explicit, implicit and IMEX finite-volume schemes on a periodic lattice.

All three schemes advance cell averages of

    u_t + div f(u) = L[A(u)]

with the update written in residual form

    U^{n+1} = U^n - dt * sum_l D_l^- f_hat(U_alpha, U_{alpha+e_l}) + dt * G A(U),

where ``G`` is the assembled weight kernel.  The explicit scheme evaluates
everything at level ``n``; the implicit scheme at ``n + 1``; the IMEX
scheme takes the convection at ``n`` and the diffusion at ``n + 1``.
Nonlinear implicit systems are solved with the damped fixed-point map
``u <- u - eps * R(u)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import CFLViolation, NoConvergence, ShapeMismatch
from .measures import LevyMeasure
from .nonlinear import Diffusion, Flux, Nonlinearity, NumericalFlux, eval_flux
from .weights import WeightKernel, apply, assemble

__all__ = [
    "GridFunction",
    "FixedPoint",
    "SchemeConfig",
    "StepReport",
    "Problem",
    "Trajectory",
    "Discretisation",
    "VARIANTS",
    "project_initial",
    "max_dt",
    "explicit_step",
    "implicit_step",
    "imex_step",
    "run",
]

VARIANTS = ("explicit", "imex", "implicit")

_x8, _w8 = np.polynomial.legendre.leggauss(8)
_G8_X = 0.5 * (_x8 + 1.0)
_G8_W = 0.5 * _w8


@dataclass
class GridFunction:
    """Cell averages on a periodic lattice of ``N^d`` cells of width ``dx``."""

    values: np.ndarray
    dx: float
    origin: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if any(n < 2 for n in self.values.shape):
            raise ShapeMismatch("need at least two cells per axis")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite values")

    @property
    def dimension(self) -> int:
        return self.values.ndim

    @property
    def n_cells(self) -> int:
        return self.values.shape[0]

    def centers(self) -> np.ndarray:
        return self.origin + (np.arange(self.n_cells) + 0.5) * self.dx

    def mass(self) -> float:
        return float(np.sum(self.values)) * self.dx**self.dimension


def project_initial(u0, N: int, dx: float, d: int = 1, origin: float = 0.0) -> GridFunction:
    """Cell averages of ``u0`` by 8-point Gauss quadrature per cell and axis.

    ``u0`` is a vectorised callable of ``d`` coordinate arrays, or an array
    of cell values which is returned unchanged.
    """
    if not callable(u0):
        vals = np.asarray(u0, dtype=float)
        if vals.shape != (N,) * d:
            raise ShapeMismatch(f"initial samples must have shape {(N,) * d}, got {vals.shape}")
        return GridFunction(vals.copy(), dx, origin)
    left = origin + np.arange(N) * dx
    pts = left[:, None] + dx * _G8_X[None, :]
    if d == 1:
        f = np.asarray(u0(pts), dtype=float)
        # offset by the first node so cellwise constants come out exactly
        vals = f[:, 0] + (f - f[:, :1]) @ _G8_W
    elif d == 2:
        X = pts[:, None, :, None]
        Y = pts[None, :, None, :]
        X, Y = np.broadcast_arrays(X, Y)
        f = np.asarray(u0(X, Y), dtype=float)
        f0 = f[:, :, :1, :1]
        vals = f0[:, :, 0, 0] + np.einsum("ijab,a,b->ij", f - f0, _G8_W, _G8_W)
    else:
        raise ShapeMismatch("only dimensions 1 and 2 are supported")
    return GridFunction(vals, dx, origin)


@dataclass(frozen=True)
class FixedPoint:
    epsilon: float | None = None
    tol: float = 1e-10
    max_iterations: int = 200_000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("fixed-point tolerance must be positive")
        if self.epsilon is not None and not 0 < self.epsilon <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping choices.

    ``dt=None`` selects the automatic step from :func:`max_dt`.
    ``time_regularity_cap`` caps the implicit step by ``safety * dx^{1 v order}``.
    """

    variant: str = "implicit"
    dt: float | None = None
    cfl_safety: float = 0.9
    fixed_point: FixedPoint = field(default_factory=FixedPoint)
    time_regularity_cap: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown scheme {self.variant!r}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")


@dataclass
class StepReport:
    dt: float
    iterations: int = 0
    residual: float = 0.0
    mass_before: float = 0.0
    mass_after: float = 0.0


@dataclass
class Discretisation:
    """Everything a step needs besides the state."""

    kernel: WeightKernel
    nonlin: Nonlinearity
    numflux: NumericalFlux = field(default_factory=NumericalFlux)
    bound: float = 1.0

    @property
    def dx(self) -> float:
        return self.kernel.dx

    @property
    def lf_c(self) -> float:
        return self.numflux.c if self.numflux.c is not None else self.nonlin.f.lipschitz(self.bound)

    def face_flux(self, u: np.ndarray, axis: int) -> np.ndarray:
        """``F_alpha = f_hat(U_alpha, U_{alpha+e_l})``."""
        return eval_flux(self.numflux, self.nonlin.f, u, np.roll(u, -1, axis=axis), c=self.lf_c)

    def convection(self, u: np.ndarray) -> np.ndarray:
        """``sum_l D_l^- f_hat``; zero without a flux."""
        if not self.nonlin.f.active:
            return np.zeros_like(u)
        out = np.zeros_like(u)
        for axis in range(u.ndim):
            F = self.face_flux(u, axis)
            out += (F - np.roll(F, 1, axis=axis)) / self.dx
        return out

    def diffusion(self, u: np.ndarray) -> np.ndarray:
        """``G A(u)``; zero without a diffusion."""
        if not self.nonlin.A.active:
            return np.zeros_like(u)
        return apply(self.kernel, self.nonlin.A(u))

    def lipschitz(self) -> tuple[float, float]:
        return self.nonlin.A.lipschitz(self.bound), self.nonlin.f.lipschitz(self.bound)


def max_dt(kernel: WeightKernel, nonlin: Nonlinearity, config: SchemeConfig, bound: float = 1.0,
           order: float | None = None) -> float:
    """Largest admissible time step (``inf`` when unconstrained).

    ``bound`` is the sup-norm of the data, which fixes the Lipschitz
    constants.  ``order`` is the singularity order used by the implicit
    time-regularity cap.
    """
    L_A = nonlin.A.lipschitz(bound) if nonlin.A.active else 0.0
    L_F = nonlin.f.lipschitz(bound)
    d = kernel.dimension
    dx = kernel.dx
    s = config.cfl_safety
    if config.variant == "explicit":
        rate = 2 * d * L_F / dx + L_A * abs(kernel.center)
        return s / rate if rate > 0 else math.inf
    if config.variant == "imex":
        return s * dx / (2 * d * L_F) if L_F > 0 else math.inf
    if config.time_regularity_cap:
        p = max(1.0, order if order is not None else 1.0)
        return s * dx**p
    return math.inf


def _values(U):
    return U.values if isinstance(U, GridFunction) else np.asarray(U, dtype=float)


def _wrap(U, values):
    if isinstance(U, GridFunction):
        return GridFunction(values, U.dx, U.origin)
    return values


def _scaled_l1(x, dx):
    return float(np.sum(np.abs(x))) * dx**x.ndim


def explicit_step(U, disc: Discretisation, dt: float, check_cfl: bool = True, cfl_safety: float = 1.0):
    """One step of the explicit scheme."""
    u = _values(U)
    if check_cfl:
        limit = max_dt(disc.kernel, disc.nonlin, SchemeConfig("explicit", cfl_safety=cfl_safety), disc.bound)
        if dt > limit * (1 + 1e-12):
            raise CFLViolation(f"dt={dt:.6g} exceeds the explicit limit {limit:.6g}")
    new = u - dt * disc.convection(u) + dt * disc.diffusion(u)
    rep = StepReport(dt=dt, mass_before=_scaled_sum(u, disc.dx), mass_after=_scaled_sum(new, disc.dx))
    return _wrap(U, new), rep


def _scaled_sum(x, dx):
    return float(np.sum(x)) * dx**x.ndim


def _auto_epsilon(disc, dt, with_convection):
    L_A, L_F = disc.lipschitz()
    d = disc.kernel.dimension
    denom = 1.0 + L_A * dt * abs(disc.kernel.center)
    if with_convection:
        denom += 2 * d * L_F * dt / disc.dx
    return 0.9 / denom


def _solve(h, disc, dt, fp: FixedPoint, with_convection):
    """Damped fixed-point solve of ``u + dt (conv(u) - G A(u)) = h``."""
    active_conv = with_convection and disc.nonlin.f.active
    if not (active_conv or disc.nonlin.A.active):
        return h.copy(), 0, 0.0
    eps = fp.epsilon if fp.epsilon is not None else _auto_epsilon(disc, dt, with_convection)

    def residual(u):
        r = u - h - dt * disc.diffusion(u)
        if active_conv:
            r += dt * disc.convection(u)
        return r

    u = h.copy()
    for it in range(fp.max_iterations + 1):
        R = residual(u)
        res = _scaled_l1(R, disc.dx)
        if res <= fp.tol:
            return u, it, res
        u = u - eps * R
    raise NoConvergence(f"fixed point did not reach {fp.tol:g} in {fp.max_iterations} iterations (residual {res:.3e})")


def implicit_step(U, disc: Discretisation, dt: float, fixed_point: FixedPoint = FixedPoint()):
    """One step of the fully implicit scheme."""
    h = _values(U)
    u, it, res = _solve(h, disc, dt, fixed_point, with_convection=True)
    rep = StepReport(dt=dt, iterations=it, residual=res, mass_before=_scaled_sum(h, disc.dx),
                     mass_after=_scaled_sum(u, disc.dx))
    return _wrap(U, u), rep


def imex_step(U, disc: Discretisation, dt: float, fixed_point: FixedPoint = FixedPoint(), check_cfl: bool = True,
              cfl_safety: float = 1.0):
    """Explicit convection followed by an implicit diffusion solve."""
    u0 = _values(U)
    if check_cfl:
        limit = max_dt(disc.kernel, disc.nonlin, SchemeConfig("imex", cfl_safety=cfl_safety), disc.bound)
        if dt > limit * (1 + 1e-12):
            raise CFLViolation(f"dt={dt:.6g} exceeds the convective limit {limit:.6g}")
    h = u0 - dt * disc.convection(u0)
    u, it, res = _solve(h, disc, dt, fixed_point, with_convection=False)
    rep = StepReport(dt=dt, iterations=it, residual=res, mass_before=_scaled_sum(u0, disc.dx),
                     mass_after=_scaled_sum(u, disc.dx))
    return _wrap(U, u), rep


@dataclass(frozen=True)
class Problem:
    """A periodic initial-value problem on ``[0, length)^d``."""

    measure: LevyMeasure
    u0: Callable | np.ndarray
    N: int
    T: float
    length: float = 2.0 * math.pi
    nonlin: Nonlinearity = field(default_factory=Nonlinearity)
    numflux: NumericalFlux = field(default_factory=NumericalFlux)
    dimension: int = 1
    snapshots: Sequence[float] = ()

    @property
    def dx(self) -> float:
        return self.length / self.N

    def refined(self, m: int) -> "Problem":
        u0 = self.u0
        if not callable(u0):
            # cell data: each cell splits into m^d cells of the same value
            u0 = np.asarray(u0, dtype=float)
            for axis in range(u0.ndim):
                u0 = np.repeat(u0, m, axis=axis)
        return replace(self, N=self.N * m, u0=u0)


@dataclass
class Trajectory:
    """Time levels of a run together with per-step reports.

    ``times[n]`` and ``levels[n]`` are ``t_n`` and ``U^n``.  :meth:`at`
    evaluates the piecewise-constant interpolant: the implicit and IMEX
    schemes use left-open intervals ``(t_n, t_{n+1}]`` carrying
    ``U^{n+1}``, the explicit scheme right-open intervals carrying ``U^n``.
    """

    variant: str
    dx: float
    times: list
    levels: list
    reports: list
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.levels[-1]

    @property
    def T(self) -> float:
        return self.times[-1]

    def at(self, t: float) -> np.ndarray:
        times = np.asarray(self.times)
        if t <= times[0]:
            return self.levels[0]
        if t >= times[-1]:
            return self.levels[-1]
        if self.variant == "explicit":
            n = int(np.searchsorted(times, t, side="right")) - 1
        else:
            n = int(np.searchsorted(times, t, side="left"))
        return self.levels[n]


def discretise(problem: Problem, kernel: WeightKernel | None = None) -> tuple[GridFunction, Discretisation]:
    dx = problem.dx
    U0 = project_initial(problem.u0, problem.N, dx, problem.dimension)
    if kernel is None:
        kernel = assemble(problem.measure, dx, problem.dimension, K=max(1, problem.N // 2),
                          policy="periodic_wrap", n_cells=problem.N)
    bound = float(np.max(np.abs(U0.values)))
    return U0, Discretisation(kernel, problem.nonlin, problem.numflux, bound)


def step_size(config: SchemeConfig, disc: Discretisation, order: float) -> float:
    """Time step requested by ``config`` for this discretisation."""
    limit = max_dt(disc.kernel, disc.nonlin, config, disc.bound, order)
    if config.dt is None:
        return limit
    if config.variant != "implicit" and config.dt > limit * (1 + 1e-12):
        raise CFLViolation(f"dt={config.dt:.6g} exceeds the {config.variant} limit {limit:.6g}")
    return config.dt


def run(config: SchemeConfig, problem: Problem, kernel: WeightKernel | None = None,
        keep_levels: bool = True) -> Trajectory:
    """March to ``problem.T``, shortening the final step to land on it."""
    U0, disc = discretise(problem, kernel)
    dt = step_size(config, disc, problem.measure.order)
    T = float(problem.T)
    if T < 0:
        raise ValueError("final time must be nonnegative")
    u = U0.values
    times, levels, reports = [0.0], [u.copy()], []
    snaps = sorted(float(ts) for ts in problem.snapshots)
    taken = {}
    for ts in snaps:
        if ts <= 0.0 or (T == 0.0):
            taken[ts] = u.copy()
    t = 0.0
    if T > 0:
        if math.isinf(dt):
            dt = T
        n_steps = max(1, math.ceil(T / dt - 1e-9))
        for n in range(n_steps):
            h = dt if n < n_steps - 1 else T - dt * (n_steps - 1)
            old = u
            if config.variant == "explicit":
                u, rep = explicit_step(u, disc, h, check_cfl=False)
            elif config.variant == "imex":
                u, rep = imex_step(u, disc, h, config.fixed_point, check_cfl=False)
            else:
                u, rep = implicit_step(u, disc, h, config.fixed_point)
            t_new = T if n == n_steps - 1 else (n + 1) * dt
            for ts in snaps:
                if ts in taken:
                    continue
                if config.variant == "explicit" and t <= ts < t_new:
                    taken[ts] = old.copy()
                elif config.variant != "explicit" and t < ts <= t_new:
                    taken[ts] = u.copy()
            reports.append(rep)
            t = t_new
            if keep_levels:
                times.append(t)
                levels.append(u.copy())
    if not keep_levels and T > 0:
        times.append(T)
        levels.append(u.copy())
    for ts in snaps:
        if ts not in taken:
            taken[ts] = u.copy()
    traj = Trajectory(config.variant, problem.dx, times, levels, reports)
    traj.snapshot_times = snaps
    traj.snapshots = [taken[ts] for ts in snaps]
    return traj
