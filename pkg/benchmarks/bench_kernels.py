"""Time the numba and numpy backends of the hot kernels on identical inputs.

    python benchmarks/bench_kernels.py [--repeat N]

The trajectory kernel is timed at register dimensions 4, 16 and 64 (one to
three qubits). Each kernel is warmed up once (numba compilation is excluded), then timed as
the best of ``--repeat`` runs. Outputs of the two backends are cross-checked.
"""
import argparse
import math
import time

import numpy as np
from scipy.linalg import expm

from dqdsim import _accel
from dqdsim.kernels import coulomb as C
from dqdsim.kernels import trajectories as T


def best_of(fn, repeat):
    fn()
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def coulomb_case(rng, m=2**16):
    centers = np.array([[0, 0, 0], [22.0, 0, 0], [0, 44.0, 0], [22, 44, 0]])
    coeffs = rng.normal(size=(4, 4))
    u = rng.random((m, 6))
    args = (u, 0, 1, centers, 0.2, math.sqrt(0.2**3 / math.pi), coeffs, 0.25, 5.0)
    return C.integrand_numba, C.integrand_numpy, args


def trajectory_case(rng, d=16, n_traj=2000, n_steps=2000):
    h = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = 0.1 * (h + h.conj().T)
    ops = 0.05 * rng.normal(size=(4, d, d)) + 0j
    heff = h - 0.5j * sum(o.conj().T @ o for o in ops)
    props = expm(-1j * heff * 0.01)[None]
    psi0 = np.zeros(d, complex)
    psi0[0] = 1
    args = (psi0, props, np.zeros(n_steps, np.int64), ops, np.array([n_steps - 1]), rng.integers(0, 2**63, n_traj, dtype=np.uint64), 64)
    return T.run_numba, T.run_numpy, args


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba is not installed; only the numpy path is available")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'numba s':>10}{'numpy s':>10}{'speedup':>10}  agree")
    cases = [("coulomb integrand", coulomb_case)]
    cases += [(f"trajectories d={d}", lambda r, d=d: trajectory_case(r, d=d)) for d in (4, 16, 64)]
    for name, case in cases:
        fast, slow, kargs = case(rng)
        t_nb, out_nb = best_of(lambda: fast(*kargs), args.repeat)
        t_np, out_np = best_of(lambda: slow(*kargs), args.repeat)
        if isinstance(out_nb, tuple):
            agree = all(np.array_equal(a, b) for a, b in zip(out_nb[1:], out_np[1:]))
            agree = agree and np.allclose(out_nb[0], out_np[0], atol=1e-12)
        else:
            agree = np.allclose(out_nb, out_np, rtol=1e-10)
        print(f"{name:<24}{t_nb:>10.4f}{t_np:>10.4f}{t_np / t_nb:>10.1f}  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
