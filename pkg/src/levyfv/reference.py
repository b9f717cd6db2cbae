"""Independent oracles for kernels and schemes.

* :func:`dense_operator_oracle` evaluates the cell-averaged discrete
  operator by QUADPACK integration of the periodised jump density, without
  touching the kernel assembly code.
* :func:`spectral_solution` solves ``u_t = L u`` exactly on the torus via
  the Lévy symbol.
* :func:`fine_grid_reference` runs a scheme on a refined lattice and block
  averages the result back.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import replace

import numpy as np
from scipy import integrate, special

from .errors import QuadratureFailure, ShapeMismatch
from .initial import fourier_coefficients
from .measures import Atomic, LevyMeasure, PowerLaw
from .scheme import GridFunction, Problem, SchemeConfig, project_initial, run

__all__ = [
    "dense_operator_oracle",
    "oracle_weights",
    "symbol_array",
    "spectral_solution",
    "fine_grid_reference",
    "restrict",
]

_ORACLE_RTOL = 1e-10


def _periodised_density(measure: LevyMeasure, dx: float, L: float):
    """``z -> sum_m 1_{|z + mL| > dx/2} rho(z + mL)`` for ``z`` in ``[0, L]``."""
    h = 0.5 * dx
    if isinstance(measure, PowerLaw):
        c, p = measure.c, 1.0 + measure.lam

        def rho(z):
            out = c * L**-p * (special.zeta(p, 1.0 + z / L) + special.zeta(p, 2.0 - z / L))
            if z > h:
                out += c * z**-p
            if L - z > h:
                out += c * (L - z) ** -p
            return out

        return rho
    if not measure.has_density:
        return lambda z: 0.0
    lo, hi = measure.support()
    reach = max(-lo, hi)
    if math.isinf(reach):
        reach = measure.tail_radius(1e-18)
    M = int(math.ceil(reach / L)) + 1

    def rho(z):
        shifts = z + L * np.arange(-M, M + 1)
        vals = measure.density(shifts)
        vals = np.where(np.abs(shifts) > h, vals, 0.0)
        return float(np.sum(vals))

    return rho


@functools.lru_cache(maxsize=64)
def oracle_weights(measure: LevyMeasure, dx: float, N: int) -> np.ndarray:
    """Jump weights ``W_j`` (index ``j`` mod N), diagonal balanced, no drift."""
    if measure.dimension != 1:
        raise ShapeMismatch("the dense oracle is one-dimensional")
    L = N * dx
    h = 0.5 * dx
    rho = _periodised_density(measure, dx, L)
    W = np.zeros(N)
    bps = [h, L - h]
    if measure.has_density:
        extra = np.asarray(measure.breakpoints(), dtype=float)
        lo, hi = measure.support()
        extra = np.concatenate([extra, [lo, hi]])
        extra = extra[np.isfinite(extra)]
        bps += list(np.mod(extra, L))
        for j in range(1, N):
            c = j * dx
            pieces = sorted({c - dx, c, c + dx} | {b for b in bps if c - dx < b < c + dx})
            total = 0.0
            for a, b in zip(pieces[:-1], pieces[1:]):
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", integrate.IntegrationWarning)
                    val, err = integrate.quad(lambda z: (1.0 - abs(z - c) / dx) * rho(z), a, b,
                                              epsabs=0.0, epsrel=_ORACLE_RTOL, limit=200)
                if not np.isfinite(val) or err > 1e-6 * abs(val) + 1e-15:
                    raise QuadratureFailure(f"oracle quadrature failed at offset {j}")
                total += val
            W[j] = total
    z, w = measure.atom_locations, measure.atom_masses
    for zi, wi in zip(z, w):
        if abs(zi) <= h or wi == 0:
            continue
        t = zi / dx
        j = math.floor(t)
        theta = t - j
        W[j % N] += wi * (1.0 - theta)
        W[(j + 1) % N] += wi * theta
    W[0] = 0.0
    W[0] = -np.sum(W)
    return W


def dense_operator_oracle(measure: LevyMeasure, dx: float, N: int, w) -> np.ndarray:
    """Cell-averaged discrete operator applied to the piecewise-constant ``w``."""
    u = np.asarray(getattr(w, "values", w), dtype=float)
    if u.shape != (N,):
        raise ShapeMismatch(f"expected {N} cell values, got shape {u.shape}")
    W = oracle_weights(measure, float(dx), int(N))
    A = np.empty((N, N))
    for a in range(N):
        A[a] = np.roll(W, a)
    out = A @ u
    gamma = float(measure.gamma_drift(0.5 * dx)[0])
    if gamma > 0:
        out += gamma * (np.roll(u, -1) - u) / dx
    elif gamma < 0:
        out += -gamma * (np.roll(u, 1) - u) / dx
    return out


_SYMBOL_CACHE: dict = {}


def symbol_array(measure: LevyMeasure, xi) -> np.ndarray:
    """``psi(xi)`` on an array; closed forms for PowerLaw and Atomic."""
    xi = np.asarray(xi, dtype=float)
    if isinstance(measure, PowerLaw):
        return (-measure.symbol_constant() * np.abs(xi) ** measure.lam).astype(complex)
    if isinstance(measure, Atomic):
        z, w = measure.atom_locations, measure.atom_masses
        comp = np.where(np.abs(z) < 1.0, z, 0.0)
        ph = xi[..., None] * z
        return np.sum(w * (np.exp(1j * ph) - 1.0 - 1j * xi[..., None] * comp), axis=-1)
    cache = _SYMBOL_CACHE.setdefault(measure, {})
    out = np.empty(xi.shape, dtype=complex)
    for idx, x in np.ndenumerate(xi):
        key = float(x)
        if key not in cache:
            cache[key] = measure.levy_symbol(key)
        out[idx] = cache[key]
    return out


def spectral_solution(measure: LevyMeasure, u0, T: float, N: int, length: float = 2 * math.pi,
                      rtol: float = 1e-15, max_modes: int = 1 << 22) -> GridFunction:
    """Cell averages at time ``T`` of the exact solution of ``u_t = L u``.

    Each Fourier mode is damped by ``exp(T psi(xi))``; modes are summed in
    blocks of ``N`` until a whole block contributes less than ``rtol``
    relative to the data, then folded onto the lattice exactly.
    """
    if measure.dimension != 1:
        raise ShapeMismatch("the spectral oracle is one-dimensional")
    dx = length / N
    if T == 0:
        return project_initial(u0, N, dx)
    bins = np.zeros(N, dtype=complex)
    c0 = complex(fourier_coefficients(u0, np.array([0.0]), length)[0])
    scale = None
    j0 = 1
    while j0 <= max_modes:
        j = np.arange(j0, j0 + N)
        xi = 2 * math.pi * j / length
        uh = fourier_coefficients(u0, xi, length)
        damp = np.exp(T * symbol_array(measure, xi))
        avg = (np.exp(1j * xi * dx) - 1.0) / (1j * xi * dx)
        c = uh * damp * avg
        np.add.at(bins, j % N, c)
        size = float(np.max(np.abs(c)))
        if scale is None:
            scale = max(size, abs(c0), 1e-300)
        j0 += N
        if size <= rtol * scale:
            break
    alpha = np.arange(N)
    # u_alpha = c0 + 2 Re sum_j c_j e^{2 pi i j alpha / N}
    phase = np.exp(2j * math.pi * np.outer(alpha, np.arange(N)) / N)
    vals = c0.real + 2.0 * np.real(phase @ bins)
    return GridFunction(vals, dx)


def restrict(u: np.ndarray, m: int) -> np.ndarray:
    """Block average by a factor ``m`` per axis."""
    u = np.asarray(u, dtype=float)
    if m == 1:
        return u.copy()
    if any(n % m for n in u.shape):
        raise ShapeMismatch(f"shape {u.shape} is not divisible by {m}")
    if u.ndim == 1:
        return u.reshape(-1, m).mean(axis=1)
    n1, n2 = u.shape
    return u.reshape(n1 // m, m, n2 // m, m).mean(axis=(1, 3))


def fine_grid_reference(problem: Problem, config: SchemeConfig, m: int, kernel=None) -> GridFunction:
    """Solution on ``m`` times finer cells, block averaged to ``problem.N`` cells.

    An automatic time step is recomputed on the fine lattice; a fixed one
    is divided by ``m``.
    """
    if m < 1 or m & (m - 1):
        raise ValueError("refinement factor must be a power of two")
    fine_cfg = config if config.dt is None else replace(config, dt=config.dt / m)
    traj = run(fine_cfg, problem.refined(m), kernel=kernel, keep_levels=False)
    return GridFunction(restrict(traj.final, m), problem.dx)
