import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from dqdsim import _accel
from dqdsim.kernels import coulomb as C
from dqdsim.kernels import trajectories as T

MASK = (1 << 64) - 1


def splitmix_reference(seed, n):
    """Plain-integer splitmix64, independent of numpy overflow behaviour."""
    out, s = [], seed
    for _ in range(n):
        s = (s + 0x9E3779B97F4A7C15) & MASK
        z = s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        z ^= z >> 31
        out.append((z >> 11) / 2.0**53)
    return out


def test_splitmix_matches_reference():
    seeds = np.array([0, 1, 2**63 + 5], np.uint64)
    state = seeds.copy()
    got = np.array([T.splitmix_uniform_numpy(state) for _ in range(5)]).T
    for k, s in enumerate(seeds.tolist()):
        assert got[k].tolist() == splitmix_reference(s, 5)


def test_splitmix_numba_scalar_matches():
    state = np.array([7, 99], np.uint64)
    a = [T._splitmix_next(state, 1) for _ in range(4)]
    assert a == splitmix_reference(99, 4)
    assert state[0] == 7


def test_gamma3_ppf_backends_and_scipy():
    u = np.linspace(1e-6, 1 - 1e-6, 501)
    ref = stats.gamma(3).ppf(u)
    a = C.gamma3_ppf_numpy(u)
    b = C.gamma3_ppf_numba(u)
    np.testing.assert_allclose(a, ref, rtol=1e-12)
    np.testing.assert_allclose(b, a, rtol=1e-13)


def _coulomb_inputs(rng, m=256):
    centers = np.array([[0, 0, 0], [22.0, 0, 0], [0, 44.0, 0], [22, 44, 0]])
    coeffs = rng.normal(size=(4, 4))
    u = rng.random((m, 6))
    return u, centers, 0.2, math.sqrt(0.2**3 / math.pi), coeffs


@pytest.mark.parametrize("cj", [1, -1])
def test_coulomb_integrand_backends_agree(rng, cj):
    u, centers, zeta, norm, coeffs = _coulomb_inputs(rng)
    a = C.integrand_numpy(u, 0, cj, centers, zeta, norm, coeffs, 0.25, 5.0)
    b = C.integrand_numba(u, 0, cj, centers, zeta, norm, coeffs, 0.25, 5.0)
    np.testing.assert_allclose(a, b, rtol=1e-11, atol=1e-14 * np.abs(a).max())


def _traj_inputs(rng, d=4, n_ops=2, n_steps=300, n_traj=64):
    h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = h + h.conj().T
    ops = rng.normal(size=(n_ops, d, d)) * 0.1 + 0j
    from scipy.linalg import expm

    heff = h - 0.5j * sum(o.conj().T @ o for o in ops)
    props = np.array([expm(-1j * heff * 0.01), expm(-1j * heff * 0.005)])
    step_prop = np.zeros(n_steps, np.int64)
    step_prop[::7] = 1
    psi0 = np.zeros(d, complex)
    psi0[0] = 1
    sample_after = np.array([-1, 99, n_steps - 1], np.int64)
    seeds = rng.integers(0, 2**63, n_traj, dtype=np.uint64)
    return psi0, props, step_prop, ops, sample_after, seeds


def test_trajectory_backends_identical(rng):
    args = _traj_inputs(rng)
    a = T.run_numba(*args, 8)
    b = T.run_numpy(*args, 8)
    np.testing.assert_array_equal(a[1], b[1])
    np.testing.assert_array_equal(a[2], b[2])
    np.testing.assert_array_equal(a[3], b[3])
    np.testing.assert_allclose(a[0], b[0], atol=1e-12)
    assert a[1].sum() > 0


def test_env_flag_disables_numba():
    code = "from dqdsim import _accel; print(_accel.use_numba(), _accel.backend_name())"
    env = {**os.environ, "DQDSIM_NUMBA": "0"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "numpy"]


def test_njit_fallback_is_identity(monkeypatch):
    monkeypatch.setattr(_accel, "HAVE_NUMBA", False)

    def f(x):
        return x + 1

    assert _accel.njit(f) is f
    assert _accel.njit(cache=True)(f) is f
    assert not _accel.use_numba()
