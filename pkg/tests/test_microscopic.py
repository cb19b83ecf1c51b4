import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import expi, gammaincinv

import dqdsim.microscopic as micro
from dqdsim.core import DeviceParams, Level
from dqdsim.kernels import coulomb as kern
from dqdsim.microscopic import (
    DotGeometry,
    QuadratureError,
    coulomb_matrix,
    dot_occupancy,
    dqd_coefficients,
    exchange_coupling_A,
    orbital,
    overlap,
    overlap_matrix,
    point_dipole_limit,
    selection_rule_report,
    two_electron_wavefunction,
)

GEOM = DotGeometry.rectangle()
SHIFTED = GEOM.displaced(0, [0.0, 2.2, 0.0])  # dot 1a moved by 10% of the 22 nm spacing


# --- independent oracles --------------------------------------------------


def grid_overlap(R, a):
    """Cylindrical-coordinate quadrature of <phi_0|phi_R> for the normalized exponential orbital."""
    z = 2.0 / a
    n2 = z**3 / math.pi

    def f(rho, x):
        return 2 * math.pi * rho * n2 * math.exp(-z * math.hypot(rho, x)) * math.exp(-z * math.hypot(rho, x - R))

    lim = R + 40 * a
    val, _ = integrate.dblquad(f, -40 * a, lim, 0, 40 * a, epsabs=1e-13, epsrel=1e-11)
    return val


def slater_J_minus_K(R, a):
    """Closed-form Coulomb minus exchange integral of two 1s Slater orbitals (units of 1/length).

    Classic two-centre results in terms of rho = zeta R; exchange uses the
    exponential-integral form with S' = e^rho (1 - rho + rho^2/3).
    """
    zeta = 2.0 / a
    rho = zeta * R
    J = (1 / rho) * (1 - math.exp(-2 * rho) * (1 + 11 * rho / 8 + 3 * rho**2 / 4 + rho**3 / 6))
    S = math.exp(-rho) * (1 + rho + rho**2 / 3)
    Sp = math.exp(rho) * (1 - rho + rho**2 / 3)
    euler = 0.5772156649015329
    K = 0.2 * (
        -math.exp(-2 * rho) * (-25 / 8 + 23 * rho / 4 + 3 * rho**2 + rho**3 / 3)
        + 6 / rho * (S**2 * (euler + math.log(rho)) + Sp**2 * expi(-4 * rho) - 2 * S * Sp * expi(-2 * rho))
    )
    return zeta * (J - K)


def point_charge_direct(geom, params):
    """a -> 0 limit of <C0|U_C|C0>: half an electron on every dot, one electron per DQD."""
    p = geom.positions
    k = params.coulomb_constant_k / params.kappa
    return 0.25 * sum(k / np.linalg.norm(p[i] - p[j]) for i in (0, 1) for j in (2, 3))


# --- orbitals ----------------------------------------------------------------


def test_orbital_normalized():
    a = 7.0
    val, _ = integrate.quad(lambda r: 4 * math.pi * r * r * orbital([0, 0, 0], a, np.array([[r, 0, 0]]))[0] ** 2, 0, 60 * a)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_overlap_examples():
    assert overlap([1, 2, 3], [1, 2, 3], 5.0) == pytest.approx(1.0, abs=1e-15)
    assert overlap([0, 0, 0], [1e4, 0, 0], 5.0) < 1e-300
    for R, a in [(10.0, 10.0), (22.0, 10.0), (3.0, 7.0)]:
        assert overlap([0, 0, 0], [R, 0, 0], a) == pytest.approx(grid_overlap(R, a), rel=1e-6)


def test_lowdin_orthonormal():
    c = dqd_coefficients(GEOM)
    np.testing.assert_allclose(c.T @ overlap_matrix(GEOM) @ c, np.eye(4), atol=1e-13)


def test_antisymmetry_and_reflection_parity(rng):
    r1 = rng.normal(scale=20, size=(50, 3))
    r2 = rng.normal(scale=20, size=(50, 3))
    parity = {Level.C0: -1, Level.C1: -1, Level.LP: 1, Level.LM: 1}
    for lvl in Level:
        psi = two_electron_wavefunction(lvl, GEOM, r1, r2)
        np.testing.assert_allclose(two_electron_wavefunction(lvl, GEOM, r2, r1), -psi, atol=1e-15 * np.abs(psi).max())
        refl = two_electron_wavefunction(lvl, GEOM, GEOM.reflect(r1), GEOM.reflect(r2))
        np.testing.assert_allclose(refl, parity[lvl] * psi, atol=1e-12 * np.abs(psi).max())


def test_symmetry_flag():
    assert GEOM.symmetric_about_E_axis
    assert not SHIFTED.symmetric_about_E_axis
    assert DotGeometry.rectangle(intra=10, inter=30).symmetric_about_E_axis


# --- quadrature kernels --------------------------------------------------------


def test_gamma3_quantile_matches_scipy():
    u = np.concatenate([np.linspace(1e-12, 1 - 1e-12, 2001), [1e-300, 1e-30, 0.5, 1 - 1e-15]])
    ref = gammaincinv(3, u)
    np.testing.assert_allclose(kern.gamma3_ppf_numpy(u), ref, rtol=1e-12)
    np.testing.assert_allclose(kern.gamma3_ppf_numba(u), ref, rtol=1e-12)


def test_backends_agree(rng):
    u = rng.random((4096, 6))
    c = np.ascontiguousarray(dqd_coefficients(GEOM))
    centers = np.ascontiguousarray(GEOM.positions)
    for ci, cj in [(0, 3), (1, 1), (2, -1)]:
        a = kern.integrand_numpy(u, ci, cj, centers, GEOM.zeta, micro.slater_norm(10.0), c, 0.25, 5.0)
        b = kern.integrand_numba(u, ci, cj, centers, GEOM.zeta, micro.slater_norm(10.0), c, 0.25, 5.0)
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-14 * np.abs(a).max())


def test_qmc_matches_slater_closed_form(monkeypatch):
    """With bare dot orbitals the C0 slot is det(1a, 2b), whose energy is J - K."""
    monkeypatch.setattr(micro, "dqd_coefficients", lambda g: np.eye(4))
    unit = DeviceParams(kappa=1.0, coulomb_constant_k=1.0)
    for R in (2.0, 5.0, 20.0, 44.0):
        g = DotGeometry(np.array([[0, 0, 0], [100, 100, 0], [200, 0, 0], [R, 0, 0]]), 10.0)
        res = coulomb_matrix(g, unit, n_samples=2**18, replicates=16)
        v, se = res.element(0, 0)
        assert abs(v - slater_J_minus_K(R, 10.0)) < 4 * se + 1e-9


# --- matrix elements ---------------------------------------------------------------


@pytest.fixture(scope="module")
def default_result():
    return coulomb_matrix(GEOM, DeviceParams(), n_samples=2**19, replicates=32)


def test_diagonal_positive_and_hermitian(default_result):
    d = np.diag(default_result.matrix)
    assert np.all(d > 0) and np.all(d > 10 * np.diag(default_result.stderr))
    np.testing.assert_array_equal(default_result.matrix, default_result.matrix.T)


def test_selection_rule_symmetric(default_result):
    m, se = default_result.matrix, default_result.stderr
    for i in (0, 1):
        for j in (2, 3):
            assert abs(m[i, j]) <= 3 * se[i, j]
    assert abs(m[0, 1]) >= 10 * se[0, 1]


def test_selection_rule_negative_control():
    rep = selection_rule_report(SHIFTED, DeviceParams(), n_samples=2**19)
    assert not rep.symmetric and not rep.leakage_zero and rep.passed
    assert len(rep.rows) == 16
    assert rep.to_csv().startswith("element,real,imag,stderr\n")


def test_small_decay_limits():
    """As a -> 0 the exchange part vanishes and C0-C1 tends to the transition-dipole coupling."""
    p = DeviceParams()
    g = GEOM.with_decay(1.5)
    res = coulomb_matrix(g, p, n_samples=2**18, replicates=16)
    v, se = res.element(0, 1)
    assert abs(v - point_dipole_limit(g, p)) < 4 * se + 1e-4 * abs(v)
    d, dse = res.element(0, 0)
    assert abs(d - point_charge_direct(g, p)) < 4 * dse + 1e-4 * d
    assert abs(res.exchange[0]) < 1e-6 * abs(res.direct[0])
    big = coulomb_matrix(GEOM, p, n_samples=2**18, replicates=16)
    assert abs(big.exchange[0]) > 1e3 * abs(res.exchange[0])


def test_exchange_grows_with_decay_length():
    p = DeviceParams()
    vals = [exchange_coupling_A(GEOM.with_decay(a), p, n_samples=2**18) for a in (10.0, 15.0, 20.0)]
    for (v0, e0), (v1, e1) in zip(vals, vals[1:]):
        assert v1 - v0 > 3 * math.hypot(e0, e1)


def test_seed_consistency():
    p = DeviceParams()
    a0, e0 = exchange_coupling_A(GEOM, p, n_samples=2**17, seed=1)
    a1, e1 = exchange_coupling_A(GEOM, p, n_samples=2**17, seed=2)
    assert abs(a0 - a1) < 3 * math.hypot(e0, e1)
    with pytest.raises(ValueError):
        exchange_coupling_A(SHIFTED, p, n_samples=2**12)


def test_determinism_and_quadrature_error():
    p = DeviceParams()
    a = coulomb_matrix(GEOM, p, n_samples=2**14, replicates=4, seed=7)
    b = coulomb_matrix(GEOM, p, n_samples=2**14, replicates=4, seed=7)
    np.testing.assert_array_equal(a.matrix, b.matrix)
    with pytest.raises(QuadratureError) as info:
        coulomb_matrix(GEOM, p, n_samples=2**13, replicates=4, rel_tol=1e-9, max_samples=2**15)
    assert info.value.result.n_samples <= 2**15


# --- occupancy -----------------------------------------------------------------


@pytest.mark.parametrize("ab", [(1, 0), (2**-0.5, 1j * 2**-0.5), (0, 1), (0.6, -0.8j)])
def test_dot_occupancy_examples(ab):
    np.testing.assert_allclose(dot_occupancy(*ab, GEOM), 0.5, atol=1e-12)


def test_occupancy_half_space_oracle(rng):
    """Independent check: mirror symmetry makes the raw electron density split evenly between dots a and b.

    Monte Carlo over electron pairs drawn from the dot-orbital mixture; the
    fraction of |psi|^2 with electron 1 on the a-side of each DQD is 1/2.
    """
    n = 200_000
    centers = GEOM.positions
    zeta = GEOM.zeta

    def draw():
        c = centers[rng.integers(4, size=n)]
        r = gammaincinv(3, rng.random(n)) / (2 * zeta)
        v = rng.normal(size=(n, 3))
        return c + r[:, None] * v / np.linalg.norm(v, axis=1)[:, None]

    def g(r):
        return np.mean([orbital(c, GEOM.decay_a, r) ** 2 for c in centers], axis=0)

    r1, r2 = draw(), draw()
    for a, b in [(1, 0), (0.6, 0.8j), (2**-0.5, -(2**-0.5))]:
        psi = a * two_electron_wavefunction(Level.C0, GEOM, r1, r2) + b * two_electron_wavefunction(Level.C1, GEOM, r1, r2)
        w = np.abs(psi) ** 2 / (g(r1) * g(r2))
        on_a = r1[:, 1] > 0
        frac = w[on_a].sum() / w.sum()
        assert frac == pytest.approx(0.5, abs=1e-3)
