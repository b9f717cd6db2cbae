import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from levyfv.errors import BandwidthTooSmall, ShapeMismatch
from levyfv.measures import CGMY, Atomic, PowerLaw, Tabulated
from levyfv.weights import apply, assemble, dump, load, sigma_hat, split, to_dense, verify_laws

TWO_ATOMS = Atomic(((1.0, 1.0), (-1.0, 1.0)))


def tent_quad(measure, dx, k):
    """Oracle: (1/dx) int_{|z| > dx/2} (dx - |z - k dx|)_+ rho(z) dz on the whole line."""
    lo, hi = (k - 1) * dx, (k + 1) * dx
    pts = sorted({lo, k * dx, hi, 0.5 * dx, -0.5 * dx})
    total = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        if b <= 0.5 * dx and a >= -0.5 * dx:
            continue
        f = lambda z: max(dx - abs(z - k * dx), 0.0) * float(measure.density(np.array([z]))[0]) / dx
        total += integrate.quad(f, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
    return total


# -- examples -----------------------------------------------------------------------


def test_two_atoms_unit_cell():
    k = assemble(TWO_ATOMS, 1.0, 1, K=2, policy="diagonal_lump")
    assert np.array_equal(k.weights, [0.0, 1.0, -2.0, 1.0, 0.0])
    assert np.all(k.gamma == 0.0)


def test_two_atoms_apply_on_three_cells():
    k = assemble(TWO_ATOMS, 1.0, 1, K=2, policy="periodic_wrap", n_cells=3)
    assert np.allclose(apply(k, np.array([1.0, 0.0, 0.0])), [-2.0, 1.0, 1.0], atol=1e-15)


def test_powerlaw_g1_matches_trapezoid_golden():
    # golden value: 10^6-node composite trapezoid of the tent overlap integral
    k = assemble(PowerLaw(0.5), 0.5, 1, K=64, policy="diagonal_lump")
    assert k.g(1) == pytest.approx(1.3137084989848649, rel=1e-12)


@pytest.mark.parametrize("off", [1, 2, 5, 6, 7, 30, 64])
def test_powerlaw_offsets_vs_quadpack(off):
    m = PowerLaw(0.5)
    k = assemble(m, 0.5, 1, K=64, policy="diagonal_lump")
    assert k.g(off) == pytest.approx(tent_quad(m, 0.5, off), rel=1e-10)
    assert k.g(-off) == k.g(off)


@pytest.mark.parametrize("measure", [CGMY(1, 2, 5, 0.5), CGMY(1, 5, 5, 1.5), Tabulated((-1, -0.05, 0.1, 2.0), (1, 30, 20, 0.5))])
def test_other_measures_vs_quadpack(measure):
    dx = 0.25
    k = assemble(measure, dx, 1, K=16, policy="diagonal_lump", lump_threshold=1.0)
    drift = measure.gamma_drift(0.5 * dx)[0]
    for off in (-16, -3, -1, 1, 2, 9, 16):
        expect = tent_quad(measure, dx, off)
        if off == 1 and drift > 0:
            expect += drift / dx
        if off == -1 and drift < 0:
            expect += -drift / dx
        assert k.g(off) == pytest.approx(expect, rel=1e-9, abs=1e-13)


def test_symmetric_measures_have_no_drift_part():
    for m in (PowerLaw(0.5), PowerLaw(1.5)):
        k = assemble(m, 0.1, 1, K=8, policy="diagonal_lump", lump_threshold=1.0)
        assert np.all(k.gamma == 0.0)
        assert np.allclose(k.weights, k.weights[::-1], rtol=0, atol=0)


def test_upwind_sign_follows_drift():
    k = assemble(Atomic(((0.5, 1.0),)), 0.25, 1, K=4, policy="diagonal_lump")
    # gamma(dx/2) = -0.5: backward difference, extra weight on offset -1
    assert k.gamma[0] == pytest.approx(-0.5)
    assert k.upwind_signs == (-1,)
    # the atom at 0.5 = 2 dx lands entirely on offset 2
    assert k.g(2) == pytest.approx(1.0)
    assert k.g(-1) == pytest.approx(0.5 / 0.25)


def test_atom_between_cell_centres_splits_linearly():
    k = assemble(Atomic(((0.75, 2.0), (-0.75, 2.0))), 0.5, 1, K=3, policy="diagonal_lump")
    assert k.g(1) == pytest.approx(1.0) and k.g(2) == pytest.approx(1.0)
    assert k.center == pytest.approx(-4.0)


# -- laws ---------------------------------------------------------------------------


@pytest.mark.parametrize("measure", [PowerLaw(0.5), PowerLaw(1.0), PowerLaw(1.5), CGMY(1, 5, 5, 0.5), CGMY(1, 2, 5, 1.2), TWO_ATOMS])
@pytest.mark.parametrize("policy", ["periodic_wrap", "diagonal_lump"])
def test_laws(measure, policy):
    merged = verify_laws(assemble(measure, 2.0**-4, 1, K=32, policy=policy, n_cells=64, lump_threshold=1.0))
    assert merged.row_sum_ok and merged.sign_ok and merged.toeplitz_ok


def test_two_atom_diagonal_bound():
    k = assemble(TWO_ATOMS, 1.0, 1, K=2, policy="diagonal_lump")
    report = verify_laws(k, TWO_ATOMS, cbar=2.0)
    assert report.diagonal_ok and report.ok
    assert report.diagonal_scaled == pytest.approx(2.0)


def test_powerlaw_diagonal_scaling_sweep():
    m = PowerLaw(1.5)
    scaled = [abs(assemble(m, 2.0**-j, 1, K=64, policy="diagonal_lump", lump_threshold=1.0).center) * sigma_hat(m, 2.0**-j)
              for j in range(3, 10)]
    assert max(scaled) / min(scaled) < 1.5


def test_constant_is_in_the_kernel():
    k = assemble(PowerLaw(1.2), 0.05, 1, K=64, policy="periodic_wrap", n_cells=128)
    assert np.max(np.abs(apply(k, np.ones(128)))) <= 1e-12 * abs(k.center)


def test_periodic_wrap_bandwidth_and_even_slot():
    k = assemble(PowerLaw(0.7), 0.1, 1, K=5, policy="periodic_wrap", n_cells=10)
    assert k.bandwidth == 5
    assert k.g(-5) == 0.0 and k.g(5) > 0.0


def test_periodic_wrap_matches_image_sum():
    m = CGMY(1, 1, 1, 0.5)
    dx, N = 0.5, 8
    k = assemble(m, dx, 1, K=4, policy="periodic_wrap", n_cells=N)
    line = assemble(m, dx, 1, K=200, policy="diagonal_lump", lump_threshold=1.0)
    col = np.zeros(N)
    for j in range(-200, 201):
        if j != 0:
            col[j % N] += line.g(j)
    for j in range(1, N):
        assert k.circulant_column((N,))[(-j) % N] == pytest.approx(col[j % N], rel=1e-9)


def test_diagonal_lump_raises_when_truncation_is_heavy():
    with pytest.raises(BandwidthTooSmall):
        assemble(PowerLaw(0.2), 0.01, 1, K=4, policy="diagonal_lump")


def test_diagonal_lump_preserves_row_sum():
    k = assemble(PowerLaw(0.5), 0.1, 1, K=8, policy="diagonal_lump", lump_threshold=1.0)
    assert k.dropped_fraction > 0
    assert abs(k.weights.sum()) <= 1e-12 * abs(k.center)


def test_self_similarity():
    lam = 1.3
    m = PowerLaw(lam)
    ref = assemble(m, 1.0, 1, K=40, policy="diagonal_lump", lump_threshold=1.0)
    for dx in (0.5, 0.1, 2.0**-7):
        k = assemble(m, dx, 1, K=40, policy="diagonal_lump", lump_threshold=1.0)
        for off in (1, 2, 7, 40):
            assert k.g(off) == pytest.approx(dx**-lam * ref.g(off), rel=1e-6)


# -- split --------------------------------------------------------------------------


@pytest.mark.parametrize("measure", [PowerLaw(0.5), PowerLaw(1.5), CGMY(1, 2, 5, 0.5), Atomic(((0.3, 1.0), (-0.7, 2.0)))])
@pytest.mark.parametrize("r", [0.1, 0.25, 0.5, 1.0])
def test_split_sums_to_full(measure, r):
    dx, N = 0.1, 32
    full = assemble(measure, dx, 1, K=16, n_cells=N)
    sk = split(measure, dx, 1, K=16, r=r, n_cells=N)
    for half in (sk.near, sk.far):
        law = verify_laws(half)
        assert law.row_sum_ok and law.sign_ok
    same_sides = np.all(np.sign(sk.near.gamma) * np.sign(sk.far.gamma) >= 0)
    if same_sides:
        assert np.allclose(sk.near.weights + sk.far.weights, full.weights, rtol=0, atol=1e-12 * abs(full.center))
    # the jump parts always add up, whatever the drift does
    w = np.random.default_rng(1).normal(size=N)
    lhs = apply(sk.near, w) + apply(sk.far, w)
    drift = lambda g, v: g * ((np.roll(v, -1) - v) if g > 0 else (v - np.roll(v, 1))) / dx
    lhs -= drift(sk.near.gamma[0], w) + drift(sk.far.gamma[0], w)
    rhs = apply(full, w) - drift(full.gamma[0], w)
    assert np.allclose(lhs, rhs, atol=1e-11 * abs(full.center))


def test_split_below_half_cell_gives_empty_near():
    sk = split(PowerLaw(1.0), 0.1, 1, K=8, r=0.02, n_cells=16)
    assert np.all(sk.near.weights == 0.0)


def test_split_two_atoms_at_radius_one():
    sk = split(TWO_ATOMS, 1.0, 1, K=2, r=1.0, policy="diagonal_lump")
    assert np.array_equal(sk.near.weights, [0, 1, -2, 1, 0])
    assert np.all(sk.far.weights == 0.0)


def test_split_far_drift_at_one_vanishes():
    sk = split(PowerLaw(1.5), 0.1, 1, K=8, r=1.0, n_cells=16)
    assert np.all(sk.far.gamma == 0.0)


# -- apply --------------------------------------------------------------------------


def test_apply_fast_equals_direct(rng):
    k = assemble(CGMY(1, 2, 5, 1.5), 2 * math.pi / 64, 1, K=32, n_cells=64)
    w = rng.normal(size=64)
    assert np.max(np.abs(apply(k, w, fast=True) - apply(k, w, fast=False))) <= 1e-12 * max(1.0, abs(k.center))


def test_apply_equals_dense(rng):
    k = assemble(PowerLaw(0.8), 0.2, 1, K=10, n_cells=20)
    w = rng.normal(size=20)
    assert np.allclose(to_dense(k, 20) @ w, apply(k, w), atol=1e-12)


def test_apply_shape_checks():
    k = assemble(PowerLaw(0.8), 0.2, 1, K=10, n_cells=20)
    with pytest.raises(ShapeMismatch):
        apply(k, np.zeros(21))
    with pytest.raises(ShapeMismatch):
        apply(k, np.zeros((20, 20)))


# -- two dimensions -----------------------------------------------------------------


def test_plane_kernel_laws_and_symmetry():
    m = PowerLaw(1.0, 1.0, 2)
    # odd lattice: no unpaired offset -N/2
    k = assemble(m, 0.25, 2, K=8, n_cells=17)
    law = verify_laws(k)
    assert law.row_sum_ok and law.sign_ok
    w = k.weights
    assert np.allclose(w, w.T, rtol=1e-12) and np.allclose(w, w[::-1, :], rtol=1e-12)


def test_plane_far_offsets_match_point_rule():
    lam, c, dx = 1.0, 1.0, 0.25
    m = PowerLaw(lam, c, 2)
    k = assemble(m, dx, 2, K=24, policy="diagonal_lump", lump_threshold=1.0)
    # far from the origin: dx^2 rho(k dx) times the tent-variance correction 1 + (2+lam)^2 dx^2 / (12 r^2)
    for off in ((20, 0), (14, 14), (24, 7)):
        r = math.hypot(*off) * dx
        point = dx * dx * c * r ** (-2 - lam) * (1 + (2 + lam) ** 2 * dx * dx / (12 * r * r))
        assert k.g(*off) == pytest.approx(point, rel=1e-5)


def test_plane_periodic_images():
    m = PowerLaw(1.0, 1.0, 2)
    line = assemble(m, 0.25, 2, K=24, policy="diagonal_lump", lump_threshold=1.0)
    wrapped = assemble(m, 0.25, 2, K=24, policy="periodic_wrap", n_cells=200)
    # images add the 2D lattice sum of |m|^-3 (about 9.03) scaled by (20/200)^3, roughly 0.9 percent
    ratio = wrapped.g(20, 0) / line.g(20, 0)
    assert 1.007 < ratio < 1.011


def test_plane_nearest_neighbour_vs_quadrature():
    lam, c, dx = 1.5, 1.0, 1.0
    m = PowerLaw(lam, c, 2)
    k = assemble(m, dx, 2, K=4, policy="diagonal_lump", lump_threshold=1.0)

    # (1/dx^2) int overlap(R_0 + z, R_(1,0)) rho(z) dz over |z| > dx/2, with the disc boundary as a limit
    def f(y, x):
        return max(dx - abs(x - dx), 0.0) * (dx - y) * c * math.hypot(x, y) ** (-2 - lam) / dx**2

    lower = lambda x: math.sqrt(max(0.25 * dx * dx - x * x, 0.0))
    total = 0.0
    for xa, xb in ((0.0, 0.5 * dx), (0.5 * dx, dx), (dx, 2 * dx)):
        total += 2 * integrate.dblquad(f, xa, xb, lower, dx, epsabs=1e-13, epsrel=1e-11)[0]
    assert k.g(1, 0) == pytest.approx(total, rel=1e-6)


# -- dump/load ----------------------------------------------------------------------


@pytest.mark.parametrize("measure,d", [(PowerLaw(1.5), 1), (CGMY(1, 2, 5, 0.5), 1), (PowerLaw(0.5, 1.0, 2), 2)])
def test_dump_load_round_trip(tmp_path, measure, d):
    k = assemble(measure, 0.125, d, K=8, n_cells=16)
    p = tmp_path / "k.txt"
    dump(k, p)
    back = load(p)
    assert np.array_equal(back.weights, k.weights)
    assert np.array_equal(back.gamma, k.gamma)
    assert (back.dx, back.bandwidth, back.policy, back.n_cells, back.dimension) == (k.dx, k.bandwidth, k.policy, k.n_cells, d)
    p2 = tmp_path / "k2.txt"
    dump(back, p2)
    assert p.read_text() == p2.read_text()


# -- properties ---------------------------------------------------------------------


@given(
    st.sampled_from([PowerLaw(0.5), PowerLaw(1.9), CGMY(1, 3, 1, 0.9), Atomic(((0.37, 1.0), (-1.3, 0.2)))]),
    st.integers(min_value=2, max_value=7),
    st.integers(min_value=4, max_value=40),
)
def test_sign_and_row_sum_property(measure, j, n):
    k = assemble(measure, 2.0**-j, 1, K=n // 2, n_cells=n)
    off = k.weights.copy()
    off[k.bandwidth] = 0
    assert k.center <= 0 and np.all(off >= 0)
    assert abs(k.weights.sum()) <= 1e-12 * max(1.0, abs(k.center))
