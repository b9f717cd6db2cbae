"""Convergence studies, theoretical rates and the Kuznetsov error bound."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import OutOfRange
from .measures import LevyMeasure
from .reference import fine_grid_reference, restrict, spectral_solution
from .scheme import Problem, SchemeConfig, run

__all__ = [
    "RateRule",
    "theoretical_rate",
    "ErrorRow",
    "ErrorTable",
    "convergence_study",
    "KuznetsovTerms",
    "kuznetsov_bound",
    "time_modulus_rate",
    "proof_selection",
    "minimise_bound",
    "CSV_HEADER",
]

CSV_HEADER = ("dx", "dt", "l1_error", "observed_order", "theoretical_order")

# explicit scheme at lambda = 1: limit of the lambda > 1 rule from above
_EXPLICIT_ALPHA = 1.0 + 1e-6


@dataclass(frozen=True)
class RateRule:
    scheme: str
    lam: float
    exponent: float
    log_factor: bool = False
    approximate: bool = False

    def __call__(self, dx):
        dx = np.asarray(dx, dtype=float)
        val = dx**self.exponent
        return val * np.abs(np.log(dx)) if self.log_factor else val


def theoretical_rate(scheme: str, lam: float) -> RateRule:
    """L1 convergence exponent for a fractional measure of order ``lam``."""
    if not 0.0 < lam < 2.0:
        raise OutOfRange(f"order must lie in (0, 2), got {lam}")
    if scheme in ("implicit", "imex"):
        if lam < 1.0:
            return RateRule(scheme, lam, 0.5)
        if lam == 1.0:
            return RateRule(scheme, lam, 0.5, log_factor=True)
        return RateRule(scheme, lam, (2.0 - lam) / 2.0)
    if scheme == "explicit":
        if lam <= 2.0 / 3.0:
            return RateRule(scheme, lam, 0.5)
        if lam == 1.0:
            a = _EXPLICIT_ALPHA
            return RateRule(scheme, lam, (2.0 - a) / (2.0 + a), approximate=True)
        return RateRule(scheme, lam, (2.0 - lam) / (2.0 + lam))
    raise OutOfRange(f"unknown scheme {scheme!r}")


@dataclass
class ErrorRow:
    dx: float
    dt: float
    l1_error: float
    observed_order: float | None = None


@dataclass
class ErrorTable:
    """Errors against a reference, sorted by decreasing ``dx``."""

    rows: list = field(default_factory=list)
    theoretical_order: float | None = None

    def __post_init__(self):
        self.rows.sort(key=lambda r: -r.dx)
        self._fill_orders()

    def _fill_orders(self):
        for prev, row in zip(self.rows, self.rows[1:]):
            if prev.l1_error > 0 and row.l1_error > 0:
                row.observed_order = math.log(prev.l1_error / row.l1_error) / math.log(prev.dx / row.dx)
            else:
                row.observed_order = math.nan
        if self.rows:
            self.rows[0].observed_order = None

    @property
    def fitted_order(self) -> float:
        """Least-squares slope of ``log error`` against ``log dx``."""
        pts = [(r.dx, r.l1_error) for r in self.rows if r.l1_error > 0]
        if len(pts) < 2:
            return math.nan
        x = np.log([p[0] for p in pts])
        y = np.log([p[1] for p in pts])
        return float(np.polyfit(x, y, 1)[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        th = "" if self.theoretical_order is None else repr(float(self.theoretical_order))
        for r in self.rows:
            obs = "" if r.observed_order is None else repr(float(r.observed_order))
            w.writerow([repr(float(r.dx)), repr(float(r.dt)), repr(float(r.l1_error)), obs, th])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ErrorTable":
        reader = csv.reader(io.StringIO(text))
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"unexpected header {header}")
        rows, th = [], None
        for rec in reader:
            if not rec:
                continue
            rows.append(ErrorRow(float(rec[0]), float(rec[1]), float(rec[2])))
            if rec[4]:
                th = float(rec[4])
        return cls(rows, th)

    def __eq__(self, other):
        if not isinstance(other, ErrorTable):
            return NotImplemented
        same = lambda a, b: (a is None and b is None) or (a is not None and b is not None and (a == b or (math.isnan(a) and math.isnan(b))))
        return (
            len(self.rows) == len(other.rows)
            and same(self.theoretical_order, other.theoretical_order)
            and all(
                a.dx == b.dx and a.dt == b.dt and a.l1_error == b.l1_error and same(a.observed_order, b.observed_order)
                for a, b in zip(self.rows, other.rows)
            )
        )

    def to_markdown(self) -> str:
        lines = [
            "| dx | dt | L1 error | observed order |",
            "|---|---|---|---|",
        ]
        for r in self.rows:
            obs = "" if r.observed_order is None else f"{r.observed_order:.3f}"
            lines.append(f"| {r.dx:.4e} | {r.dt:.4e} | {r.l1_error:.4e} | {obs} |")
        lines.append("")
        lines.append(f"Fitted order: {self.fitted_order:.3f}")
        if self.theoretical_order is not None:
            lines.append(f"Theoretical order: {self.theoretical_order:.3f}")
        return "\n".join(lines) + "\n"


def _solve_final(args):
    config, problem = args
    traj = run(config, problem, keep_levels=False)
    dt = traj.reports[0].dt if traj.reports else 0.0
    return traj.final, dt


def convergence_study(problem: Problem, config: SchemeConfig, resolutions: Sequence[int], reference: str = "spectral",
                      refinement: int = 8, workers: int | None = None, theoretical: float | None = None) -> ErrorTable:
    """Errors at ``problem.T`` for each number of cells in ``resolutions``.

    ``reference='spectral'`` compares with the exact linear solution;
    ``reference='fine'`` with one run on ``refinement`` times the finest
    lattice, block averaged to every coarser one.
    """
    res = sorted(int(n) for n in resolutions)
    if len(res) < 3:
        raise ValueError("need at least three resolutions")
    if any(b % a for a, b in zip(res, res[1:])):
        raise ValueError("each resolution must divide the next")
    jobs = [(config, replace(problem, N=n)) for n in res]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_final, jobs))
    else:
        results = [_solve_final(j) for j in jobs]
    rows = []
    if reference == "spectral":
        for n, (u, dt) in zip(res, results):
            ref = spectral_solution(problem.measure, problem.u0, problem.T, n, problem.length).values
            dx = problem.length / n
            rows.append(ErrorRow(dx, dt, float(np.sum(np.abs(u - ref))) * dx))
    elif reference == "fine":
        finest = replace(problem, N=res[-1])
        fine = fine_grid_reference(finest, config, refinement).values
        fine_n = res[-1]
        for n, (u, dt) in zip(res, results):
            ref = restrict(fine, fine_n // n)
            dx = problem.length / n
            rows.append(ErrorRow(dx, dt, float(np.sum(np.abs(u - ref))) * dx ** u.ndim))
    else:
        raise ValueError(f"unknown reference {reference!r}")
    if theoretical is None and problem.measure.order > 0:
        try:
            theoretical = theoretical_rate(config.variant, problem.measure.order).exponent
        except OutOfRange:
            theoretical = None
    return ErrorTable(rows, theoretical)


# -- Kuznetsov bound ----------------------------------------------------------------


def time_modulus_rate(lam: float, scheme: str = "implicit") -> Callable[[float], float]:
    """``sigma(tau)``: ``tau``, ``tau |ln tau|`` or ``tau^{1/lam}`` by order."""
    if lam < 1.0:
        return lambda t: t
    if lam == 1.0:
        if scheme == "explicit":
            a = 1.0 / _EXPLICIT_ALPHA
            return lambda t: t**a
        return lambda t: t * abs(math.log(t)) if 0 < t < 1 else t
    return lambda t: t ** (1.0 / lam)


@dataclass(frozen=True)
class KuznetsovTerms:
    eps: float
    modulus: float
    I1: float
    I2: float
    I3: float

    @property
    def total(self) -> float:
        return self.eps + self.modulus + self.I1 + self.I2 + self.I3


def kuznetsov_bound(measure: LevyMeasure, dx: float, dt: float, eps: float, delta: float, r: float,
                    time_modulus: Callable[[float], float] | None = None, scheme: str = "implicit",
                    with_flux: bool = False) -> KuznetsovTerms:
    """Terms of the a priori error bound (constants set to one).

    ``time_modulus`` maps a time lag to a bound on the L1 modulus; by
    default ``sigma(lag + dt)`` from :func:`time_modulus_rate`.  The third
    term only enters for the explicit scheme.
    """
    if not (0.5 * dx < r <= 1.0):
        raise OutOfRange(f"split radius must lie in (dx/2, 1], got {r}")
    if not (eps > 0 and delta > 0):
        raise OutOfRange("eps and delta must be positive")
    sigma = time_modulus_rate(measure.order, scheme)
    modulus = time_modulus if time_modulus is not None else (lambda lag: sigma(lag + dt))
    tm = measure.tail_moments(r)
    far = measure.tail_moments(1.0).mass
    factor = tm.first_moment_to_one + far + (1.0 if with_flux else 0.0)
    I1 = tm.second_moment_in / eps
    I2 = (dx / eps + dt / delta) * factor
    I3 = 0.0
    if scheme == "explicit":
        e_dt = time_modulus(dt) if time_modulus is not None else (sigma(dt) if dt > 0 else 0.0)
        I3 = e_dt * tm.mass
    return KuznetsovTerms(eps, float(modulus(delta)), I1, I2, I3)


def proof_selection(lam: float, dx: float) -> tuple[float, float, float]:
    """Parameter choices ``(eps, delta, r)`` balancing the implicit bound."""
    if lam <= 1.0:
        s = math.sqrt(dx)
        return s, s, dx
    return dx ** ((2.0 - lam) / 2.0), dx ** (lam / 2.0), dx


def minimise_bound(measure: LevyMeasure, dx: float, dt: float | None = None, scheme: str = "implicit",
                   points: int = 61) -> tuple[tuple[float, float, float], float]:
    """Grid search over log-spaced ``(eps, delta, r)``; returns the argmin and value."""
    lam = measure.order
    if dt is None:
        dt = dx ** max(1.0, lam)
    sigma = time_modulus_rate(lam, scheme)
    eps_grid = np.logspace(math.log10(dx) - 1, 0.0, points)
    delta_grid = eps_grid
    r_grid = np.logspace(math.log10(0.5 * dx) + 1e-9, 0.0, points)
    best, arg = math.inf, None
    second = {r: measure.tail_moments(float(r)) for r in r_grid}
    far = measure.tail_moments(1.0).mass
    E, D = np.meshgrid(eps_grid, delta_grid, indexing="ij")
    mod = np.vectorize(lambda t: sigma(t + dt))(D)
    for r in r_grid:
        tm = second[r]
        if not r > 0.5 * dx:
            continue
        factor = tm.first_moment_to_one + far
        total = E + mod + tm.second_moment_in / E + (dx / E + dt / D) * factor
        if scheme == "explicit":
            total = total + sigma(dt) * tm.mass
        i = np.unravel_index(np.argmin(total), total.shape)
        if total[i] < best:
            best = float(total[i])
            arg = (float(E[i]), float(D[i]), float(r))
    return arg, best
