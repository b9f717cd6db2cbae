"""Norms, structural checks and entropy residuals of computed solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .measures import LevyMeasure
from .nonlinear import Nonlinearity, NumericalFlux, eval_flux
from .scheme import Discretisation, Trajectory
from .weights import WeightKernel, apply, split

__all__ = [
    "Norms",
    "norms",
    "CheckResult",
    "InvariantReport",
    "EntropyProbe",
    "default_probes",
    "entropy_residual",
    "check_entropy",
    "check_kato",
    "check_trajectory",
    "check_pair",
    "time_modulus",
    "time_modulus_curve",
]


@dataclass(frozen=True)
class Norms:
    l1: float
    linf: float
    bv: float


def norms(u, dx: float | None = None) -> Norms:
    """``l1 = dx^d sum|u|``, ``linf = max|u|``, ``bv = dx^{d-1} sum_l sum |u_a - u_{a-e_l}|``."""
    if dx is None:
        dx = u.dx
    v = np.asarray(getattr(u, "values", u), dtype=float)
    d = v.ndim
    bv = sum(float(np.sum(np.abs(v - np.roll(v, 1, axis=l)))) for l in range(d))
    return Norms(l1=float(np.sum(np.abs(v))) * dx**d, linf=float(np.max(np.abs(v))), bv=bv * dx ** (d - 1))


@dataclass
class CheckResult:
    name: str
    worst: float
    tol: float
    locator: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.tol)

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        loc = f" {self.locator}" if self.locator else ""
        return f"{self.name} {flag} {self.worst:.6e}{loc}"


@dataclass
class InvariantReport:
    """A set of named checks; each records its worst violation."""

    checks: list = field(default_factory=list)

    def add(self, result: CheckResult) -> CheckResult:
        self.checks.append(result)
        return result

    def merge(self, other: "InvariantReport") -> "InvariantReport":
        by_name = {c.name: c for c in self.checks}
        for c in other.checks:
            if c.name in by_name and by_name[c.name].worst >= c.worst:
                continue
            by_name[c.name] = c
        return InvariantReport(list(by_name.values()))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self) -> str:
        return "".join(c.line() + "\n" for c in self.checks)

    @classmethod
    def from_text(cls, text: str) -> "InvariantReport":
        # the tolerance is not serialised: a parsed check keeps its verdict
        out = cls()
        for raw in text.splitlines():
            parts = raw.split(maxsplit=3)
            if len(parts) < 3:
                continue
            worst = float(parts[2])
            tol = math.inf if parts[1] == "PASS" else -math.inf
            out.add(CheckResult(parts[0], worst, tol, parts[3] if len(parts) > 3 else ""))
        return out


@dataclass(frozen=True)
class EntropyProbe:
    """Kruzkov entropy ``|u - k|`` split at jump size ``r``."""

    k: float
    r: float

    def eta(self, u):
        return np.abs(np.asarray(u) - self.k)

    def eta_prime(self, u):
        return np.sign(np.asarray(u) - self.k)

    def q(self, u, f):
        return self.eta_prime(u) * (f(u) - f(np.asarray(self.k)))


def default_probes(lo: float, hi: float, dx: float) -> list:
    ks = sorted({lo - 1.0, lo, 0.0, 0.5 * (lo + hi), hi, hi + 1.0})
    rs = sorted({dx, 2.0 * dx, 0.5, 1.0})
    return [EntropyProbe(k, r) for k in ks for r in rs]


def _entropy_flux(numflux, f, c, a, b, k):
    """``Q(a, b) = f_hat(a v k, b v k) - f_hat(a ^ k, b ^ k)``."""
    return eval_flux(numflux, f, np.maximum(a, k), np.maximum(b, k), c=c) - eval_flux(
        numflux, f, np.minimum(a, k), np.minimum(b, k), c=c
    )


def _d_minus_q(disc: Discretisation, u, k):
    if not disc.nonlin.f.active:
        return np.zeros_like(u)
    out = np.zeros_like(u)
    for axis in range(u.ndim):
        Q = _entropy_flux(disc.numflux, disc.nonlin.f, disc.lf_c, u, np.roll(u, -1, axis=axis), k)
        out += (Q - np.roll(Q, 1, axis=axis)) / disc.dx
    return out


def entropy_residual(variant: str, old, new, dt: float, disc: Discretisation, near: WeightKernel,
                     far: WeightKernel, k: float) -> np.ndarray:
    """Cell-entropy residual; the inequality reads ``residual <= 0``.

    ``eta(U^{n+1}, k) - eta(U^n, k) + dt D^- Q(U^c) - dt G^r eta(A(U^d), A(k))
    - dt sgn(U^{n+1} - k) (G_r A(U^d))`` with ``c = n+1`` for the implicit
    scheme and ``n`` otherwise, ``d = n`` for the explicit scheme and ``n+1``
    otherwise.
    """
    A = disc.nonlin.A
    conv_state = new if variant == "implicit" else old
    diff_state = old if variant == "explicit" else new
    res = np.abs(new - k) - np.abs(old - k) + dt * _d_minus_q(disc, conv_state, k)
    if A.active:
        Ad = A(diff_state)
        Ak = float(A(np.array(k)))
        res -= dt * apply(near, np.abs(Ad - Ak))
        res -= dt * np.sign(new - k) * apply(far, Ad)
    return res


def check_entropy(trajectory: Trajectory, measure: LevyMeasure, disc: Discretisation,
                  probes: Sequence[EntropyProbe] | None = None, tol: float = 1e-10) -> InvariantReport:
    """Evaluate the cell-entropy inequalities at every step, cell and probe."""
    levels = trajectory.levels
    lo = min(float(np.min(u)) for u in levels)
    hi = max(float(np.max(u)) for u in levels)
    dx = disc.dx
    if probes is None:
        probes = default_probes(lo, hi, dx)
    N = levels[0].shape[0]
    kernel = disc.kernel
    splits = {}
    worst, where = -math.inf, ""
    for p in probes:
        if p.r not in splits:
            splits[p.r] = split(measure, dx, kernel.dimension, K=max(1, N // 2), r=p.r,
                                policy=kernel.policy, n_cells=kernel.n_cells)
        sk = splits[p.r]
        for n in range(len(levels) - 1):
            dt = trajectory.times[n + 1] - trajectory.times[n]
            res = entropy_residual(trajectory.variant, levels[n], levels[n + 1], dt, disc, sk.near, sk.far, p.k)
            i = int(np.argmax(res))
            if res.flat[i] > worst:
                worst = float(res.flat[i])
                where = f"step={n} cell={i} k={p.k:.6g} r={p.r:.6g}"
    report = InvariantReport()
    report.add(CheckResult("cell_entropy", max(worst, 0.0), tol, where))
    return report


def check_kato(kernel: WeightKernel, A, samples: Iterable, tol: float = 1e-12) -> InvariantReport:
    """``sgn(u - v) G(A(u) - A(v)) <= G |A(u) - A(v)|`` at every cell and sample."""
    worst, where = 0.0, ""
    scale = abs(kernel.center) or 1.0
    for s, (u, v) in enumerate(samples):
        dA = A(u) - A(v)
        lhs = np.sign(u - v) * apply(kernel, dA)
        rhs = apply(kernel, np.abs(dA))
        viol = (lhs - rhs) / (scale * max(1.0, float(np.max(np.abs(dA)))))
        i = int(np.argmax(viol))
        if viol.flat[i] > worst:
            worst = float(viol.flat[i])
            where = f"sample={s} cell={i}"
    report = InvariantReport()
    report.add(CheckResult("kato", worst, tol, where))
    return report


def check_trajectory(trajectory: Trajectory, dx: float, mass_tol: float = 1e-12, tol: float = 1e-12) -> InvariantReport:
    """Conservation, maximum principle and BV-diminishing along one run."""
    levels = trajectory.levels
    d = levels[0].ndim
    m0 = float(np.sum(levels[0])) * dx**d
    n0 = norms(levels[0], dx)
    mass_worst, max_worst, bv_worst = 0.0, 0.0, 0.0
    mass_at = max_at = bv_at = ""
    prev_bv = n0.bv
    for n, u in enumerate(levels[1:], start=1):
        nm = norms(u, dx)
        dm = abs(float(np.sum(u)) * dx**d - m0)
        if dm > mass_worst:
            mass_worst, mass_at = dm, f"step={n}"
        over = nm.linf - n0.linf
        if over > max_worst:
            max_worst, max_at = over, f"step={n}"
        inc = nm.bv - prev_bv
        if inc > bv_worst:
            bv_worst, bv_at = inc, f"step={n}"
        prev_bv = nm.bv
    report = InvariantReport()
    report.add(CheckResult("conservation", mass_worst, mass_tol, mass_at))
    report.add(CheckResult("max_principle", max_worst, tol * max(1.0, n0.linf), max_at))
    report.add(CheckResult("bv_diminishing", bv_worst, tol * max(1.0, n0.bv), bv_at))
    return report


def check_pair(a: Trajectory, b: Trajectory, dx: float, tol: float = 1e-12, ordered: bool = False) -> InvariantReport:
    """L1 contraction between two runs, and the comparison principle when ``ordered``."""
    d = a.levels[0].ndim
    base = float(np.sum(np.abs(a.levels[0] - b.levels[0]))) * dx**d
    worst, at = 0.0, ""
    cmp_worst, cmp_at = 0.0, ""
    for n, (u, v) in enumerate(zip(a.levels, b.levels)):
        dist = float(np.sum(np.abs(u - v))) * dx**d
        if dist - base > worst:
            worst, at = dist - base, f"step={n}"
        if ordered:
            gap = float(np.max(u - v))
            if gap > cmp_worst:
                cmp_worst, cmp_at = gap, f"step={n}"
    report = InvariantReport()
    report.add(CheckResult("l1_contraction", worst, tol * max(1.0, base), at))
    if ordered:
        report.add(CheckResult("comparison", cmp_worst, tol, cmp_at))
    return report


def _interval_gaps(traj: Trajectory) -> np.ndarray:
    """``gap[i, j]``: infimum of ``|t - s|`` over the intervals carrying levels i and j."""
    t = np.asarray(traj.times, dtype=float)
    n = t.size
    if traj.variant == "explicit":
        # level i on [t_i, t_{i+1}), the last level only at T
        lo, hi = t, np.append(t[1:], t[-1])
    else:
        # level 0 at 0, level i on (t_{i-1}, t_i]
        lo, hi = np.concatenate([[t[0]], t[:-1]]), t
    gap = np.maximum(lo[None, :] - hi[:, None], lo[:, None] - hi[None, :])
    return np.maximum(gap, 0.0).reshape(n, n)


def time_modulus_curve(traj: Trajectory, deltas: Sequence[float], dx: float | None = None) -> np.ndarray:
    """``E_delta`` for every ``delta`` in ``deltas``."""
    dx = traj.dx if dx is None else dx
    U = np.stack([np.asarray(u).ravel() for u in traj.levels])
    d = np.asarray(traj.levels[0]).ndim
    gaps = _interval_gaps(traj)
    dmax = max(deltas)
    n = U.shape[0]
    dist = np.zeros((n, n))
    for i in range(n):
        js = np.nonzero(gaps[i, i + 1 :] < dmax)[0] + i + 1
        if js.size:
            dist[i, js] = np.sum(np.abs(U[js] - U[i][None, :]), axis=1) * dx**d
    dist = np.maximum(dist, dist.T)
    out = []
    for delta in deltas:
        mask = gaps < delta
        out.append(float(np.max(np.where(mask, dist, 0.0))))
    return np.asarray(out)


def time_modulus(traj: Trajectory, delta: float, dx: float | None = None) -> float:
    """``E_delta = sup_{|t - s| < delta} ||u(t) - u(s)||_{L1}`` of the interpolant."""
    return float(time_modulus_curve(traj, [delta], dx)[0])
