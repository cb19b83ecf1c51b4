"""Quantum-jump trajectory kernels.

Every trajectory advances by fixed steps with precomputed no-jump
propagators ``exp(-i H_eff dt / hbar)``. When the squared norm falls below the
trajectory's current threshold a jump is applied at the end of that step,
choosing the channel with probability proportional to ``||L psi||^2``.

Random numbers come from a counter-based splitmix64 stream per trajectory so
the numba and numpy paths consume identical draws.
"""
import numpy as np

from .._accel import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def splitmix_uniform_numpy(state):
    """Advance ``state`` (uint64 array, in place) and return uniforms in [0, 1)."""
    state += GOLDEN
    z = state.copy()
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return (z >> _S11).astype(np.float64) * _INV53


@njit(cache=True)
def _splitmix_next(state, i):
    state[i] += GOLDEN
    z = state[i]
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    z = z ^ (z >> _S31)
    return np.float64(z >> _S11) * _INV53


@njit(cache=True)
def run_numba(psi0, props, step_prop, jump_ops, sample_after, seeds, max_jumps):
    n_traj = seeds.shape[0]
    d = psi0.shape[0]
    n_ops = jump_ops.shape[0]
    n_steps = step_prop.shape[0]
    n_samp = sample_after.shape[0]
    pops = np.zeros((n_traj, n_samp, d))
    n_jumps = np.zeros(n_traj, np.int64)
    jump_step = -np.ones((n_traj, max_jumps), np.int64)
    jump_op = -np.ones((n_traj, max_jumps), np.int64)
    state = seeds.copy()
    psi = np.empty(d, np.complex128)
    tmp = np.empty(d, np.complex128)
    weights = np.empty(n_ops)
    for t in range(n_traj):
        for k in range(d):
            psi[k] = psi0[k]
        r = _splitmix_next(state, t)
        s_ix = 0
        while s_ix < n_samp and sample_after[s_ix] < 0:
            for k in range(d):
                pops[t, s_ix, k] = psi[k].real ** 2 + psi[k].imag ** 2
            s_ix += 1
        for step in range(n_steps):
            u = props[step_prop[step]]
            nrm = 0.0
            for i in range(d):
                acc = 0j
                for j in range(d):
                    acc += u[i, j] * psi[j]
                tmp[i] = acc
                nrm += acc.real ** 2 + acc.imag ** 2
            for i in range(d):
                psi[i] = tmp[i]
            if n_ops > 0 and nrm < r:
                total = 0.0
                for o in range(n_ops):
                    w = 0.0
                    for i in range(d):
                        acc = 0j
                        for j in range(d):
                            acc += jump_ops[o, i, j] * psi[j]
                        w += acc.real ** 2 + acc.imag ** 2
                    weights[o] = w
                    total += w
                x = _splitmix_next(state, t) * total
                chosen = n_ops - 1
                run = 0.0
                for o in range(n_ops):
                    run += weights[o]
                    if x < run:
                        chosen = o
                        break
                nrm = 0.0
                for i in range(d):
                    acc = 0j
                    for j in range(d):
                        acc += jump_ops[chosen, i, j] * psi[j]
                    tmp[i] = acc
                    nrm += acc.real ** 2 + acc.imag ** 2
                scale = 1.0 / np.sqrt(nrm)
                for i in range(d):
                    psi[i] = tmp[i] * scale
                if n_jumps[t] < max_jumps:
                    jump_step[t, n_jumps[t]] = step
                    jump_op[t, n_jumps[t]] = chosen
                n_jumps[t] += 1
                r = _splitmix_next(state, t)
                nrm = 1.0
            while s_ix < n_samp and sample_after[s_ix] == step:
                for k in range(d):
                    pops[t, s_ix, k] = (psi[k].real ** 2 + psi[k].imag ** 2) / nrm
                s_ix += 1
    return pops, n_jumps, jump_step, jump_op


def run_numpy(psi0, props, step_prop, jump_ops, sample_after, seeds, max_jumps):
    n_traj = seeds.shape[0]
    d = psi0.shape[0]
    n_ops = jump_ops.shape[0]
    n_samp = sample_after.shape[0]
    pops = np.zeros((n_traj, n_samp, d))
    n_jumps = np.zeros(n_traj, np.int64)
    jump_step = -np.ones((n_traj, max_jumps), np.int64)
    jump_op = -np.ones((n_traj, max_jumps), np.int64)
    state = seeds.copy()
    psi = np.tile(np.asarray(psi0, complex), (n_traj, 1))
    r = splitmix_uniform_numpy(state)
    rows = np.arange(n_traj)
    for s_ix in np.flatnonzero(sample_after < 0):
        pops[:, s_ix] = np.abs(psi) ** 2
    for step, p_ix in enumerate(step_prop):
        psi = psi @ props[p_ix].T
        nrm = np.einsum("ij,ij->i", psi.real, psi.real) + np.einsum("ij,ij->i", psi.imag, psi.imag)
        hit = np.flatnonzero(nrm < r) if n_ops else np.empty(0, int)
        if hit.size:
            sub = psi[hit]
            cand = np.einsum("oij,tj->toi", jump_ops, sub)
            w = (cand.real**2 + cand.imag**2).sum(axis=2)
            cum = np.cumsum(w, axis=1)
            sub_state = state[hit]
            x = splitmix_uniform_numpy(sub_state) * cum[:, -1]
            chosen = np.minimum((cum <= x[:, None]).sum(axis=1), n_ops - 1)
            new = cand[np.arange(hit.size), chosen]
            new /= np.sqrt((new.real**2 + new.imag**2).sum(axis=1))[:, None]
            psi[hit] = new
            slot = n_jumps[hit]
            keep = slot < max_jumps
            jump_step[hit[keep], slot[keep]] = step
            jump_op[hit[keep], slot[keep]] = chosen[keep]
            n_jumps[hit] += 1
            r[hit] = splitmix_uniform_numpy(sub_state)
            state[hit] = sub_state
            nrm[hit] = 1.0
        for s_ix in np.flatnonzero(sample_after == step):
            pops[rows, s_ix] = np.abs(psi) ** 2 / nrm[:, None]
    return pops, n_jumps, jump_step, jump_op
