"""Toeplitz weight kernels of the discrete Lévy operator.

A kernel stores the weights ``g_k`` of

    (G w)_alpha = sum_k g_k w_{alpha + k},

with ``g_0 = -sum_{k != 0} g_k``.  In one dimension the off-diagonal
weights are tent-overlap integrals

    g_k = int_{|z| > dx/2} T(z/dx - k) dmu(z),    T(s) = (1 - |s|)_+,

which are assembled from the zeroth and first moment of the measure on
every grid cell.  The compensator drift is discretised by an upwind
difference.  Two truncation policies are available: ``periodic_wrap``
folds every offset onto a torus of ``n_cells`` cells, ``diagonal_lump``
drops offsets beyond the bandwidth and rebalances the diagonal.
"""

from __future__ import annotations

import functools
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import special

from .errors import BandwidthTooSmall, LevyFVError, QuadratureFailure, ShapeMismatch
from .measures import LevyMeasure, PowerLaw

__all__ = [
    "WeightKernel",
    "SplitKernel",
    "LawReport",
    "POLICIES",
    "assemble",
    "split",
    "apply",
    "verify_laws",
    "sigma_hat",
    "dump",
    "load",
    "to_dense",
]

POLICIES = ("periodic_wrap", "diagonal_lump")
DEFAULT_LUMP_THRESHOLD = 0.1

_GL_ORDER = 24
_x, _w = np.polynomial.legendre.leggauss(_GL_ORDER)
_GL_X = 0.5 * (_x + 1.0)
_GL_W = 0.5 * _w
_PANEL_RTOL = 1e-13
_SERIES_TERMS = 14
_SERIES_START = 6
_TAIL_EPS = 1e-17


@dataclass(frozen=True, eq=False)
class WeightKernel:
    """Offset weights of the discrete operator on a uniform lattice.

    ``weights`` has shape ``(2K + 1,) * dimension``; entry ``weights[K + k]``
    is ``g_k``.  ``upwind_signs[l]`` is +1 when the drift along axis ``l``
    is discretised with a forward difference and -1 for a backward one.
    """

    dx: float
    dimension: int
    bandwidth: int
    weights: np.ndarray
    gamma: np.ndarray
    policy: str
    n_cells: int | None = None
    dropped_fraction: float = 0.0
    upwind_signs: tuple = field(default=())

    def __post_init__(self):
        self.weights.setflags(write=False)
        if not self.upwind_signs:
            signs = tuple(1 if g > 0 else -1 for g in np.atleast_1d(self.gamma))
            object.__setattr__(self, "upwind_signs", signs)

    @property
    def center(self) -> float:
        """The diagonal weight g_0."""
        return float(self.weights[(self.bandwidth,) * self.dimension])

    def g(self, *k: int) -> float:
        if len(k) != self.dimension:
            raise ShapeMismatch(f"offset must have {self.dimension} components")
        if max(abs(v) for v in k) > self.bandwidth:
            return 0.0
        return float(self.weights[tuple(self.bandwidth + v for v in k)])

    def offsets(self):
        """Iterate over ``(k, g_k)`` for nonzero weights."""
        K = self.bandwidth
        for idx in zip(*np.nonzero(self.weights)):
            yield tuple(int(i) - K for i in idx), float(self.weights[idx])

    @functools.cached_property
    def _spectra(self):
        # per lattice size: rfft of the circulant first column
        return {}

    def circulant_column(self, shape) -> np.ndarray:
        """Kernel folded onto a periodic lattice of the given shape."""
        shape = tuple(shape)
        col = np.zeros(shape)
        K = self.bandwidth
        grids = np.meshgrid(*[np.arange(-K, K + 1)] * self.dimension, indexing="ij")
        idx = tuple(np.mod(-g, n).ravel() for g, n in zip(grids, shape))
        np.add.at(col, idx, self.weights.ravel())
        return col

    def spectrum(self, shape) -> np.ndarray:
        shape = tuple(shape)
        cache = self._spectra
        if shape not in cache:
            cache[shape] = np.fft.rfftn(self.circulant_column(shape))
        return cache[shape]

    def with_weights(self, weights, gamma=None) -> "WeightKernel":
        return WeightKernel(
            dx=self.dx,
            dimension=self.dimension,
            bandwidth=(weights.shape[0] - 1) // 2,
            weights=weights,
            gamma=self.gamma if gamma is None else gamma,
            policy=self.policy,
            n_cells=self.n_cells,
            dropped_fraction=self.dropped_fraction,
        )


@dataclass(frozen=True, eq=False)
class SplitKernel:
    """Near (``dx/2 < |z| <= r``) and far (``|z| > r``) parts of a kernel."""

    r: float
    near: WeightKernel
    far: WeightKernel


# -- one-dimensional cell moments ----------------------------------------------


def _gauss_panels(fun, a, b):
    """Gauss-Legendre values of int f and int (u - a_cell) f on panels."""
    h = b - a
    u = a[:, None] + h[:, None] * _GL_X[None, :]
    f = fun(u) * (_GL_W[None, :] * h[:, None])
    return f, u


def _cell_moments(fun, edges, n_cells):
    """Moments ``P0_i = int f``, ``P1_i = int (u - i) f`` over cells ``[i, i+1]``.

    ``edges`` are sorted panel endpoints in cell units (u >= 0), each panel
    lying inside a single cell.  Panels are bisected until a Gauss rule on
    the panel agrees with the same rule on both halves.
    """
    P0 = np.zeros(n_cells)
    P1 = np.zeros(n_cells)
    if edges.size < 2:
        return P0, P1
    a, b = edges[:-1], edges[1:]
    keep = b > a
    a, b = a[keep], b[keep]
    cell = np.floor(a + 1e-12 * np.maximum(1.0, a)).astype(int)

    def both(a, b, cell):
        f, u = _gauss_panels(fun, a, b)
        return f.sum(axis=1), (f * (u - cell[:, None])).sum(axis=1)

    w0, w1 = both(a, b, cell)
    scale = float(np.sum(np.abs(w0))) + 1e-300
    for _ in range(60):
        if a.size == 0:
            break
        m = 0.5 * (a + b)
        l0, l1 = both(a, m, cell)
        r0, r1 = both(m, b, cell)
        h0, h1 = l0 + r0, l1 + r1
        tol = _PANEL_RTOL * np.abs(h0) + 1e-17 * scale
        ok = (np.abs(h0 - w0) <= tol) & (np.abs(h1 - w1) <= tol)
        np.add.at(P0, cell[ok], h0[ok])
        np.add.at(P1, cell[ok], h1[ok])
        bad = ~ok
        a, m, b, cell = a[bad], m[bad], b[bad], cell[bad]
        w0 = np.concatenate([l0[bad], r0[bad]])
        w1 = np.concatenate([l1[bad], r1[bad]])
        a, b, cell = np.concatenate([a, m]), np.concatenate([m, b]), np.concatenate([cell, cell])
    else:
        raise QuadratureFailure("cell moments did not converge")
    if a.size:
        raise QuadratureFailure("cell moments did not converge")
    return P0, P1


def _half_edges(lo, hi, extra):
    """Panel endpoints covering ``(lo, hi]`` split at integers and ``extra``."""
    ints = np.arange(math.ceil(lo), math.floor(hi) + 1, dtype=float)
    pts = np.concatenate([[lo, hi], ints, extra[(extra > lo) & (extra < hi)]])
    return np.unique(pts)


@functools.lru_cache(maxsize=256)
def _tail_radius(measure: LevyMeasure, eps: float) -> float:
    return measure.tail_radius(eps)


def _line_offdiag(measure: LevyMeasure, dx: float, lo: float, hi: float, kmax: int | None = None):
    """Off-diagonal tent weights of ``1_{lo < |z| <= hi} mu``.

    Returns ``(g, series)``: ``g`` covers offsets ``-Kd..Kd`` (entry at the
    centre is zero) and ``series`` is ``None`` or ``(coef, powers, k_start)``
    describing ``g_k = sum_n coef_n |k|^{-powers_n}`` for ``|k| >= k_start``.
    """
    lo_y, hi_y = lo / dx, hi / dx
    series = None
    if isinstance(measure, PowerLaw) and math.isinf(hi):
        k_start = max(_SERIES_START, math.ceil(lo_y) + 1)
        lam = measure.lam
        n = np.arange(1, _SERIES_TERMS + 1)
        coef = 2.0 * special.poch(1.0 + lam, 2 * n - 2) / special.factorial(2 * n) * measure.c * dx**-lam
        series = (coef, 2 * n - 1 + lam, k_start)
        hi_y = float(k_start)
    elif math.isinf(hi) or math.isinf(hi_y):
        s_lo, s_hi = measure.support()
        if math.isinf(s_lo) or math.isinf(s_hi):
            eps = _TAIL_EPS * max(measure.radial_moment(0, lo, math.inf), 1e-300)
            hi_y = _tail_radius(measure, eps) / dx
        else:
            hi_y = max(-s_lo, s_hi) / dx
        hi_y = max(hi_y, lo_y)
    n_cells = int(math.ceil(hi_y)) + 1
    Kd = n_cells + 1
    g = np.zeros(2 * Kd + 1)

    if measure.has_density and hi_y > lo_y:
        bps = np.asarray(measure.breakpoints(), dtype=float) / dx
        s_lo, s_hi = measure.support()
        for side in (+1, -1):
            top = min(hi_y, (s_hi if side > 0 else -s_lo) / dx)
            if not top > lo_y:
                continue
            extra = np.abs(bps[np.sign(bps) == side])

            def fun(u, side=side):
                return dx * measure.density(side * u * dx)

            P0, P1 = _cell_moments(fun, _half_edges(lo_y, top, extra), n_cells)
            # cells [i, i+1] on this side map to grid cells j with local coordinate theta
            i = np.arange(n_cells)
            if side > 0:
                j, M0, M1 = i, P0, P1
            else:
                j, M0, M1 = -(i + 1), P0, P0 - P1
            # g_k = M1_{k-1} + M0_k - M1_k
            np.add.at(g, Kd + j + 1, M1)
            np.add.at(g, Kd + j, M0 - M1)

    z, w = measure.atom_locations, measure.atom_masses
    if z.size:
        sel = (np.abs(z) > lo) & (np.abs(z) <= hi) & (w > 0)
        t = z[sel] / dx
        j = np.floor(t).astype(int)
        theta = t - j
        need = int(np.max(np.abs(j)) + 2) if j.size else 0
        if need > Kd:
            g = np.pad(g, need - Kd)
            Kd = need
        np.add.at(g, Kd + j, w[sel] * (1.0 - theta))
        np.add.at(g, Kd + j + 1, w[sel] * theta)

    if series is not None:
        # keep direct values only below the series range
        k_start = series[2]
        keep = np.abs(np.arange(-Kd, Kd + 1)) < k_start
        g = np.where(keep, g, 0.0)
    g[Kd] = 0.0
    g = np.maximum(g, 0.0)  # rounding in M0 - M1 differences can leave -1e-30
    if kmax is not None and kmax > Kd:
        g = np.pad(g, kmax - Kd)
    return g, series


def _series_values(series, k):
    coef, powers, k_start = series
    k = np.abs(np.asarray(k, dtype=float))
    out = np.sum(coef[None, :] * k[:, None] ** (-powers[None, :]), axis=1)
    return np.where(k >= k_start, out, 0.0)


def _series_tail_sum(series, k_from):
    """``sum_{k >= k_from} g_k`` for one side."""
    coef, powers, k_start = series
    k_from = max(k_from, k_start)
    return float(np.sum(coef * special.zeta(powers, k_from)))


def _fold_line(g, series, n):
    """Fold weights (and series tail) onto the torus Z / nZ."""
    Kd = (g.size - 1) // 2
    col = np.zeros(n)
    ks = np.arange(-Kd, Kd + 1)
    np.add.at(col, np.mod(ks, n), g)
    if series is not None:
        coef, powers, k_start = series
        # explicit terms up to a few periods, Hurwitz zeta beyond
        k_end = k_start + 4 * n
        kk = np.arange(k_start, k_end)
        vals = _series_values(series, kk)
        np.add.at(col, np.mod(kk, n), vals)
        np.add.at(col, np.mod(-kk, n), vals)
        j = np.arange(n)
        first = k_end + np.mod(j - k_end, n)  # smallest k >= k_end with k = j mod n
        pos = np.sum(
            coef[None, :] * float(n) ** (-powers[None, :]) * special.zeta(powers[None, :], first[:, None] / n),
            axis=1,
        )
        col += pos
        col += pos[np.mod(-j, n)]
    col[0] = 0.0
    return col


def _column_to_centered(col):
    """Torus column (index = offset mod n) to a centred array of offsets."""
    n = col.size
    K = n // 2
    out = np.zeros(2 * K + 1)
    for k in range(-K, K + 1):
        if n % 2 == 0 and k == -K:
            continue
        out[K + k] = col[k % n]
    return out


def _add_drift(weights, gamma, dx):
    K = (weights.shape[0] - 1) // 2
    d = weights.ndim
    if K < 1:
        weights = np.pad(weights, 1)
        K = 1
    for l, gl in enumerate(np.atleast_1d(gamma)):
        if gl == 0.0:
            continue
        e = [K] * d
        e[l] = K + (1 if gl > 0 else -1)
        weights[tuple(e)] += abs(gl) / dx
    return weights


def _finish(weights):
    c = (weights.shape[0] - 1) // 2
    centre = (c,) * weights.ndim
    weights[centre] = 0.0
    weights[centre] = -float(np.sum(weights))
    return weights


def _line_kernel(measure, dx, K, policy, n_cells, lo, hi, gamma, lump_threshold):
    if policy == "periodic_wrap":
        g, series = _line_offdiag(measure, dx, lo, hi)
        col = _fold_line(g, series, n_cells)
        weights = _column_to_centered(col)
        dropped = 0.0
    else:
        g, series = _line_offdiag(measure, dx, lo, hi, kmax=K)
        Kd = (g.size - 1) // 2
        ks = np.arange(-Kd, Kd + 1)
        if series is not None:
            extra = np.arange(series[2], K + 1)
            if extra.size:
                vals = _series_values(series, extra)
                g[Kd + extra] += vals
                g[Kd - extra] += vals
        inside = np.abs(ks) <= K
        kept = g[inside]
        dropped_mass = float(np.sum(g[~inside]))
        if series is not None:
            dropped_mass += 2.0 * _series_tail_sum(series, max(K + 1, series[2]))
        total = float(np.sum(kept)) + dropped_mass
        dropped = dropped_mass / total if total > 0 else 0.0
        if dropped > lump_threshold:
            raise BandwidthTooSmall(
                f"bandwidth {K} drops {dropped:.3g} of the off-diagonal mass (limit {lump_threshold})"
            )
        weights = kept.copy()
    if np.any(np.atleast_1d(gamma) != 0.0):
        if policy == "periodic_wrap" and n_cells is not None and n_cells < 3:
            col = np.zeros(n_cells)
            for k in range(-(weights.size // 2), weights.size // 2 + 1):
                col[k % n_cells] += weights[weights.size // 2 + k]
            gl = float(np.atleast_1d(gamma)[0])
            col[(1 if gl > 0 else -1) % n_cells] += abs(gl) / dx
            col[0] = 0.0
            weights = _column_to_centered(col)
        else:
            weights = _add_drift(weights, gamma, dx)
    return _finish(weights), dropped


# -- two-dimensional assembly (PowerLaw only) ----------------------------------


def _plane_cell_moments(lam, c, R):
    """Bilinear moments of ``c |y|^{-2-lam}`` restricted to ``|y| > 1/2``.

    Returns ``(Q00, Q10, Q01, Q11)`` indexed ``[i1 + R, i2 + R]`` for cells
    ``[i1, i1+1] x [i2, i2+1]``, ``-R <= i < R``; ``Qab`` integrates
    ``theta1^a theta2^b`` against the density.
    """
    X, W = _GL_X, _GL_W
    i = np.arange(R)
    y = i[:, None] + X[None, :]
    dens = c * (y[:, None, :, None] ** 2 + y[None, :, None, :] ** 2) ** (-(2 + lam) / 2)
    f = dens * (W[:, None] * W[None, :])
    t1 = X[:, None] * np.ones(X.size)[None, :]
    t2 = t1.T
    q = [f.sum(axis=(2, 3)), (f * t1).sum(axis=(2, 3)), (f * t2).sum(axis=(2, 3)), (f * t1 * t2).sum(axis=(2, 3))]
    o = _origin_cell_moments(lam, c)
    for arr, val in zip(q, o):
        arr[0, 0] = val
    idx = np.arange(-R, R)
    mirror = np.where(idx >= 0, idx, -idx - 1)
    flip = idx < 0
    sub = np.ix_(mirror, mirror)
    q00, q10, q01, q11 = (arr[sub] for arr in q)
    f1 = flip[:, None]
    f2 = flip[None, :]
    # theta -> 1 - theta on mirrored axes
    Q10 = np.where(f1, q00 - q10, q10)
    Q11a = np.where(f1, q01 - q11, q11)
    Q01 = np.where(f2, q00 - q01, q01)
    Q11 = np.where(f2, Q10 - Q11a, Q11a)
    return q00, Q10, Q01, Q11


def _origin_cell_moments(lam, c):
    """Moments over ``[0,1]^2 minus {|y| <= 1/2}`` of ``c |y|^{-2-lam}``."""
    X, W = np.polynomial.legendre.leggauss(40)
    out = np.zeros(4)

    def radial(m, r1):
        # int_{1/2}^{r1} r^{m - 1 - lam} dr
        p = m - lam
        if abs(p) < 1e-14:
            return np.log(r1 / 0.5)
        return (r1**p - 0.5**p) / p

    for a, b in ((0.0, math.pi / 4), (math.pi / 4, math.pi / 2)):
        phi = a + (b - a) * 0.5 * (X + 1.0)
        wt = (b - a) * 0.5 * W
        rmax = np.where(phi < math.pi / 4, 1.0 / np.cos(phi), 1.0 / np.sin(phi))
        cs, sn = np.cos(phi), np.sin(phi)
        out[0] += c * np.sum(wt * radial(0, rmax))
        out[1] += c * np.sum(wt * cs * radial(1, rmax))
        out[2] += c * np.sum(wt * sn * radial(1, rmax))
        out[3] += c * np.sum(wt * cs * sn * radial(2, rmax))
    return tuple(out)


def _plane_offdiag(measure: PowerLaw, dx, R=48):
    """Tent-product weights for offsets ``|k|_inf <= R``, scaled to ``dx``."""
    lam, c = measure.lam, measure.c
    Rc = R + 1
    Q00, Q10, Q01, Q11 = _plane_cell_moments(lam, c, Rc)
    n = 2 * Rc
    g = np.zeros((n + 1, n + 1))
    # cell i contributes (1 - theta) to offset i and theta to offset i + 1 per axis
    g[:n, :n] += Q00 - Q10 - Q01 + Q11
    g[1:, :n] += Q10 - Q11
    g[:n, 1:] += Q01 - Q11
    g[1:, 1:] += Q11
    g = g[1:-1, 1:-1] * dx**-lam
    g[R, R] = 0.0
    return np.maximum(g, 0.0)


def _plane_point_weights(lam, c, k1, k2):
    """Far-field tent-product weight: point value plus Laplacian correction."""
    r2 = k1.astype(float) ** 2 + k2.astype(float) ** 2
    p = 2.0 + lam
    return c * r2 ** (-p / 2) * (1.0 + p * p / (12.0 * r2))


def _plane_kernel(measure, dx, K, policy, n_cells, lump_threshold):
    if not isinstance(measure, PowerLaw) or measure.dimension != 2:
        raise LevyFVError("two-dimensional assembly supports PowerLaw measures only")
    lam, c = measure.lam, measure.c
    R = 48
    near = _plane_offdiag(measure, dx, R)
    if policy == "periodic_wrap":
        n = n_cells
        col = np.zeros((n, n))
        ks = np.arange(-R, R + 1)
        idx = np.ix_(np.mod(ks, n), np.mod(ks, n))
        np.add.at(col, idx, near)
        # far field by point formula out to max(4n, 4R), uniform spreading beyond
        Rf = max(4 * n, 4 * R)
        ks = np.arange(-Rf, Rf + 1)
        K1, K2 = np.meshgrid(ks, ks, indexing="ij")
        far = (np.maximum(np.abs(K1), np.abs(K2)) > R)
        vals = _plane_point_weights(lam, c, K1[far], K2[far]) * dx**-lam
        np.add.at(col, (np.mod(K1[far], n), np.mod(K2[far], n)), vals)
        # mass beyond the square of half-width Rf, approximated by the disk outside radius Rf
        tail = 2.0 * math.pi * c * Rf ** (-lam) / lam * dx**-lam
        col += tail / (n * n)
        col[0, 0] = 0.0
        Kc = n // 2
        weights = np.zeros((2 * Kc + 1, 2 * Kc + 1))
        for a in range(-Kc, Kc + 1):
            for b in range(-Kc, Kc + 1):
                if n % 2 == 0 and (a == -Kc or b == -Kc):
                    continue
                weights[Kc + a, Kc + b] = col[a % n, b % n]
        dropped = 0.0
    else:
        if K > R:
            ks = np.arange(-K, K + 1)
            K1, K2 = np.meshgrid(ks, ks, indexing="ij")
            with np.errstate(divide="ignore"):
                weights = _plane_point_weights(lam, c, K1, K2) * dx**-lam
            weights[K - R : K + R + 1, K - R : K + R + 1] = near
        else:
            weights = near[R - K : R + K + 1, R - K : R + K + 1].copy()
        total = 2.0 * math.pi * c * 0.5 ** (-lam) / lam * dx**-lam  # total jump mass of |y| > 1/2
        kept = float(np.sum(weights))
        dropped = max(0.0, (total - kept) / total)
        if dropped > lump_threshold:
            raise BandwidthTooSmall(
                f"bandwidth {K} drops {dropped:.3g} of the off-diagonal mass (limit {lump_threshold})"
            )
    return _finish(weights), dropped


# -- public operations --------------------------------------------------------------


def _check_inputs(measure, dx, d, K, policy, n_cells):
    if not dx > 0:
        raise ValueError("dx must be positive")
    if policy not in POLICIES:
        raise ValueError(f"unknown truncation policy {policy!r}")
    if K < 1:
        raise ValueError("bandwidth must be at least 1")
    if d != measure.dimension:
        raise ShapeMismatch(f"measure has dimension {measure.dimension}, requested {d}")
    if d > 2:
        raise LevyFVError("only dimensions 1 and 2 are supported")
    if policy == "periodic_wrap" and (n_cells is None or n_cells < 1):
        raise ValueError("periodic_wrap needs the number of cells per axis")


@functools.lru_cache(maxsize=64)
def _assemble_cached(measure, dx, d, K, policy, n_cells, lump_threshold, lo, hi, gamma_key):
    gamma = np.array(gamma_key, dtype=float)
    if d == 1:
        weights, dropped = _line_kernel(measure, dx, K, policy, n_cells, lo, hi, gamma, lump_threshold)
    else:
        if lo != 0.5 * dx or not math.isinf(hi):
            raise LevyFVError("splitting is only available in one dimension")
        weights, dropped = _plane_kernel(measure, dx, K, policy, n_cells, lump_threshold)
    Kw = (weights.shape[0] - 1) // 2
    return WeightKernel(
        dx=dx,
        dimension=d,
        bandwidth=Kw,
        weights=weights,
        gamma=gamma,
        policy=policy,
        n_cells=n_cells,
        dropped_fraction=dropped,
    )


def assemble(
    measure: LevyMeasure,
    dx: float,
    d: int = 1,
    K: int = 64,
    policy: str = "periodic_wrap",
    n_cells: int | None = None,
    lump_threshold: float = DEFAULT_LUMP_THRESHOLD,
) -> WeightKernel:
    """Assemble the weight kernel of ``measure`` on a lattice of width ``dx``.

    Under ``periodic_wrap`` the bandwidth of the result is ``n_cells // 2``
    since every offset lands somewhere on the torus; ``K`` is then only
    checked for validity.
    """
    _check_inputs(measure, dx, d, K, policy, n_cells)
    gamma = measure.gamma_drift(0.5 * dx)
    return _assemble_cached(
        measure, float(dx), d, int(K), policy, n_cells, float(lump_threshold), 0.5 * dx, math.inf, tuple(gamma)
    )


def _zero_kernel(dx, d, policy, n_cells):
    return WeightKernel(
        dx=dx, dimension=d, bandwidth=1, weights=np.zeros((3,) * d), gamma=np.zeros(d), policy=policy, n_cells=n_cells
    )


def split(
    measure: LevyMeasure,
    dx: float,
    d: int = 1,
    K: int = 64,
    r: float = 1.0,
    policy: str = "periodic_wrap",
    n_cells: int | None = None,
    lump_threshold: float = DEFAULT_LUMP_THRESHOLD,
) -> SplitKernel:
    """Split the kernel at jump size ``r``.

    The near kernel carries jumps ``dx/2 < |z| <= r`` and the drift
    ``gamma(dx/2) - gamma(r)``; the far kernel carries ``|z| > r`` and
    ``gamma(r)``.  For ``r <= dx/2`` the near kernel is zero.
    """
    _check_inputs(measure, dx, d, K, policy, n_cells)
    if d != 1:
        raise LevyFVError("splitting is only available in one dimension")
    if not r > 0:
        raise ValueError("split radius must be positive")
    h = 0.5 * dx
    if r <= h:
        far = assemble(measure, dx, d, K, policy, n_cells, lump_threshold)
        return SplitKernel(r=r, near=_zero_kernel(dx, d, policy, n_cells), far=far)
    g_far = measure.gamma_drift(r)
    g_near = measure.gamma_drift(h) - g_far
    args = (measure, float(dx), d, int(K), policy, n_cells, float(lump_threshold))
    near = _assemble_cached(*args, h, float(r), tuple(g_near))
    far = _assemble_cached(*args, float(r), math.inf, tuple(g_far))
    return SplitKernel(r=r, near=near, far=far)


def apply(kernel: WeightKernel, w, fast: bool | None = None) -> np.ndarray:
    """``v_alpha = sum_k g_k w_{alpha + k}`` with periodic indexing.

    ``w`` may be an array or any object with ``values`` and ``dx``
    attributes.  The circular-convolution path is used when ``fast`` is
    true, or by default when the kernel is wide.
    """
    values = getattr(w, "values", w)
    dxw = getattr(w, "dx", None)
    if dxw is not None and not math.isclose(dxw, kernel.dx, rel_tol=1e-12):
        raise ShapeMismatch(f"grid width {dxw} does not match kernel width {kernel.dx}")
    u = np.asarray(values, dtype=float)
    if u.ndim != kernel.dimension:
        raise ShapeMismatch(f"expected a {kernel.dimension}-dimensional array, got shape {u.shape}")
    if kernel.n_cells is not None and any(n != kernel.n_cells for n in u.shape):
        raise ShapeMismatch(f"kernel was folded onto {kernel.n_cells} cells, got shape {u.shape}")
    if fast is None:
        fast = kernel.bandwidth > 16
    if fast:
        mult = kernel.spectrum(u.shape)
        axes = tuple(range(u.ndim))
        return np.fft.irfftn(np.fft.rfftn(u, axes=axes) * mult, s=u.shape, axes=axes)
    out = np.zeros_like(u)
    for k, gk in kernel.offsets():
        out += gk * np.roll(u, tuple(-v for v in k), axis=tuple(range(u.ndim)))
    return out


def to_dense(kernel: WeightKernel, n: int) -> np.ndarray:
    """Dense matrix of the operator on ``n`` cells (d = 1)."""
    if kernel.dimension != 1:
        raise ShapeMismatch("dense form is only provided in one dimension")
    col = kernel.circulant_column((n,))
    # row alpha, column alpha + k holds g_k; col[m] = g_{-m}
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    return col[(-idx) % n]


def sigma_hat(measure: LevyMeasure, s: float) -> float:
    """Diagonal scale: ``s^lam``, ``s/|ln s|`` or ``s`` by order; ``s`` or ``s^2`` otherwise."""
    order = measure.order
    fractional = isinstance(measure, PowerLaw) or order > 0
    if fractional:
        if order > 1:
            return s**order
        if order == 1:
            return s / abs(math.log(s))
        return s
    return s if measure.finite_first_moment else s * s


@dataclass
class LawReport:
    row_sum: float
    row_sum_ok: bool
    sign_ok: bool
    toeplitz_ok: bool
    diagonal_scaled: float
    diagonal_ok: bool | None

    @property
    def ok(self) -> bool:
        return self.row_sum_ok and self.sign_ok and self.toeplitz_ok and self.diagonal_ok is not False

    def lines(self):
        yield f"row_sum_zero {'PASS' if self.row_sum_ok else 'FAIL'} {self.row_sum:.3e}"
        yield f"sign_pattern {'PASS' if self.sign_ok else 'FAIL'}"
        yield f"toeplitz {'PASS' if self.toeplitz_ok else 'FAIL'}"
        flag = "SKIP" if self.diagonal_ok is None else "PASS" if self.diagonal_ok else "FAIL"
        yield f"diagonal_bound {flag} {self.diagonal_scaled:.6g}"


def verify_laws(kernel: WeightKernel, measure: LevyMeasure | None = None, cbar: float | None = None) -> LawReport:
    """Check row sums, sign pattern, Toeplitz structure and the diagonal bound.

    The diagonal bound ``|g_0| sigma_hat(dx) <= cbar`` is only judged when
    both ``measure`` and ``cbar`` are supplied.
    """
    w = kernel.weights
    K = kernel.bandwidth
    total = float(np.sum(w))
    scale = float(np.sum(np.abs(w))) or 1.0
    row_ok = abs(total) <= 1e-12 * max(1.0, scale)
    centre = (K,) * kernel.dimension
    off = w.copy()
    off[centre] = 0.0
    sign_ok = bool(w[centre] <= 0.0 and np.all(off >= 0.0))
    # Toeplitz: every row of the dense operator is the shifted first row
    toeplitz_ok = True
    if kernel.dimension == 1:
        n = kernel.n_cells or (2 * K + 1)
        if n <= 512:
            A = to_dense(kernel, n)
            first = A[0]
            toeplitz_ok = all(np.array_equal(A[a], np.roll(first, a)) for a in range(n))
    diag_scaled = float("nan")
    diag_ok = None
    if measure is not None:
        diag_scaled = abs(kernel.center) * sigma_hat(measure, kernel.dx)
        if cbar is not None:
            diag_ok = diag_scaled <= cbar
    return LawReport(total, row_ok, sign_ok, toeplitz_ok, diag_scaled, diag_ok)


# -- text dump/load -------------------------------------------------------------------

_FMT = "%.17g"


def dump(kernel: WeightKernel, path) -> None:
    """Write the kernel as text; floats carry 17 significant digits."""
    lines = [
        "# levyfv weight kernel",
        f"dx {_FMT % kernel.dx}",
        f"dimension {kernel.dimension}",
        f"bandwidth {kernel.bandwidth}",
        f"policy {kernel.policy}",
        f"n_cells {kernel.n_cells if kernel.n_cells is not None else '-'}",
        "gamma " + " ".join(_FMT % g for g in np.atleast_1d(kernel.gamma)),
        f"dropped_fraction {_FMT % kernel.dropped_fraction}",
    ]
    K = kernel.bandwidth
    for idx in np.ndindex(kernel.weights.shape):
        val = kernel.weights[idx]
        if val != 0.0:
            lines.append(" ".join(str(i - K) for i in idx) + " " + _FMT % val)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def load(path) -> WeightKernel:
    header = {}
    entries = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0][0].isalpha():
            header[parts[0]] = parts[1:]
        else:
            entries.append(parts)
    d = int(header["dimension"][0])
    K = int(header["bandwidth"][0])
    weights = np.zeros((2 * K + 1,) * d)
    for parts in entries:
        idx = tuple(int(v) + K for v in parts[:d])
        weights[idx] = float(parts[d])
    n_cells = header["n_cells"][0]
    return WeightKernel(
        dx=float(header["dx"][0]),
        dimension=d,
        bandwidth=K,
        weights=weights,
        gamma=np.array([float(v) for v in header["gamma"]]),
        policy=header["policy"][0],
        n_cells=None if n_cells == "-" else int(n_cells),
        dropped_fraction=float(header.get("dropped_fraction", ["0"])[0]),
    )
