"""Phonon-induced pseudo-spin flips: rate laws, Lindblad evolution, quantum jumps.

A decoherence event flips one DQD between |+> (ground) and |->. Each DQD
gets two jump operators, emission ``|+><-|`` and absorption ``|-><+|``, with
rates set by the single-phonon laws and the Bose occupation, plus half of the
two-phonon floor in each direction.

Rates are quoted in 1/s; the time-domain solvers work in ps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import _accel
from .core import (
    GuardError,
    Level,
    RegisterState,
    apply_local,
    basis_labels,
    embed,
    leakage_mask,
    segment_hamiltonian,
    segment_local_unitaries,
    segments,
)
from .kernels import trajectories as _tk

PER_S_TO_PER_PS = 1e-12
MAX_LINDBLAD_QUBITS = 3
MAX_TRAJECTORY_QUBITS = 3
# above this dimension the batched numpy kernel outruns the per-trajectory numba loop
NUMBA_TRAJECTORY_MAX_DIM = 4
KINDS = ("deformation", "piezoelectric", "two_phonon")
EXPONENTS = {"deformation": 5, "piezoelectric": 3}


class ConvergenceError(RuntimeError):
    """Step halving did not reach the requested tolerance."""


@dataclass(frozen=True)
class PhononChannel:
    """Single-phonon channel with ``tau(eps) = tau_ref (eps/eps_ref)^-exponent``,
    or a constant two-phonon floor (``kind == "two_phonon"``)."""

    kind: str
    tau_ref: float = 1.0  # s
    eps_ref: float = 1.0  # meV
    two_phonon_rate: float = 0.0  # 1/s
    temperature_tag: float = None  # kT (meV) at which two_phonon_rate was measured

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown phonon channel kind {self.kind!r}")
        if self.kind == "two_phonon":
            if not (math.isfinite(self.two_phonon_rate) and self.two_phonon_rate >= 0):
                raise ValueError("two_phonon_rate must be >= 0")
        elif not (self.tau_ref > 0 and self.eps_ref > 0):
            raise ValueError("tau_ref and eps_ref must be > 0")

    @property
    def exponent(self):
        return EXPONENTS.get(self.kind)

    @classmethod
    def gaas_piezoelectric(cls, eps_ref=1.0):
        return cls("piezoelectric", 1e-2, eps_ref)

    @classmethod
    def gaas_deformation(cls, eps_ref=1.0):
        return cls("deformation", 1e6, eps_ref)

    @classmethod
    def two_phonon(cls, rate, temperature_tag=None):
        return cls("two_phonon", two_phonon_rate=rate, temperature_tag=temperature_tag)


@dataclass(frozen=True)
class ChannelSet:
    channels: tuple = ()
    material: str = "piezoelectric_active"

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        kinds = [c.kind for c in self.channels]
        if len(set(kinds)) != len(kinds):
            raise ValueError("at most one channel per kind")
        if self.material == "deformation_only" and "piezoelectric" in kinds:
            raise ValueError("piezoelectric phonons do not couple in a deformation-only material (e.g. Si)")

    def get(self, kind):
        return next((c for c in self.channels if c.kind == kind), None)


def spontaneous_tau(eps, ch):
    """Spontaneous-emission lifetime (s) at gap ``eps`` (meV)."""
    if ch.kind == "two_phonon":
        raise ValueError("two-phonon channel has no spontaneous lifetime")
    if not eps > 0:
        raise ValueError("eps must be > 0")
    return ch.tau_ref * (eps / ch.eps_ref) ** (-ch.exponent)


def bose_occupation(eps, kT):
    """``1 / (exp(eps/kT) - 1)``; zero at ``kT == 0``."""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    if kT < 0:
        raise ValueError("kT must be >= 0")
    if kT == 0:
        return 0.0
    return 1.0 / math.expm1(eps / kT)


def stimulated_tau(eps, kT, ch, process="emission"):
    """Lifetime including the thermal bath: ``tau/(1+n)`` for emission, ``tau/n`` for absorption."""
    tau = spontaneous_tau(eps, ch)
    n = bose_occupation(eps, kT)
    if process == "emission":
        return tau / (1.0 + n)
    if process == "absorption":
        return math.inf if n == 0 else tau / n
    raise ValueError("process must be 'emission' or 'absorption'")


def flip_rates(eps, kT, channels):
    """(emission, absorption) rates in 1/s for one DQD with gap ``eps``."""
    down = up = 0.0
    for ch in channels.channels:
        if ch.kind == "two_phonon":
            down += 0.5 * ch.two_phonon_rate
            up += 0.5 * ch.two_phonon_rate
            continue
        g0 = 1.0 / spontaneous_tau(eps, ch)
        n = bose_occupation(eps, kT)
        down += (1.0 + n) * g0
        up += n * g0
    return down, up


def total_flip_rate(eps, kT, channels):
    """Emission plus absorption over all channels, plus the two-phonon floor (1/s)."""
    return sum(flip_rates(eps, kT, channels))


# ---------------------------------------------------------------------------
# jump operators


@dataclass(frozen=True)
class FlipChannel:
    """Emission/absorption on one DQD; rates in 1/ps."""

    qubit: int
    dqd: int
    down: float
    up: float

    @property
    def label(self):
        return f"q{self.qubit}.dqd{self.dqd}"


def flip_channels(n_qubits, channels, eps, kT, dqds=None):
    """FlipChannels for every DQD (or the listed ``(qubit, dqd)`` pairs)."""
    down, up = flip_rates(eps, kT, channels)
    targets = dqds if dqds is not None else [(q, d) for q in range(n_qubits) for d in (0, 1)]
    return [FlipChannel(q, d, down * PER_S_TO_PER_PS, up * PER_S_TO_PER_PS) for q, d in targets]


def _dqd_ladder(dqd):
    """4x4 emission operator |+><-| acting on one DQD of a qubit."""
    op = np.zeros((4, 4))
    for src in Level:
        signs = list(src.dqd_signs)
        if signs[dqd] == -1:
            signs[dqd] = 1
            dst = next(l for l in Level if l.dqd_signs == tuple(signs))
            op[int(dst), int(src)] = 1.0
    return op


def lowering_operator(dqd):
    return _dqd_ladder(dqd)


def raising_operator(dqd):
    return _dqd_ladder(dqd).T.copy()


def jump_operators(n_qubits, chans):
    """Full-register ``sqrt(rate) L`` (rates in 1/ps) and their labels."""
    ops, labels = [], []
    for ch in chans:
        for kind, rate, local in (("emit", ch.down, lowering_operator(ch.dqd)), ("absorb", ch.up, raising_operator(ch.dqd))):
            if rate > 0:
                ops.append(math.sqrt(rate) * embed(local, [ch.qubit], n_qubits))
                labels.append(f"{ch.label}.{kind}")
    return ops, labels


# ---------------------------------------------------------------------------
# Lindblad


def _gad_local(ch, dt):
    """Kraus operators of exact emission/absorption on one DQD, embedded in the 4-level qubit."""
    gamma = ch.down + ch.up
    if gamma == 0:
        return []
    lam = -math.expm1(-gamma * dt)
    p = ch.down / gamma
    lower, raise_ = lowering_operator(ch.dqd), raising_operator(ch.dqd)
    ground = lower @ lower.T  # projector onto DQD in |+>
    excited = raise_ @ raise_.T
    keep = math.sqrt(1.0 - lam)
    ks = [
        math.sqrt(p) * (ground + keep * excited),
        math.sqrt(p * lam) * lower,
        math.sqrt(1.0 - p) * (keep * ground + excited),
        math.sqrt((1.0 - p) * lam) * raise_,
    ]
    return [k for k in ks if np.any(k)]


def _apply_channel(t, n, qubit, kraus):
    acc = None
    for k in kraus:
        term = apply_local(apply_local(t, k, [qubit]), k.conj(), [n + qubit])
        acc = term if acc is None else acc + term
    return acc


def _strang_step(t, n, unitaries_half, dissipators):
    for qs, u in unitaries_half:
        t = apply_local(apply_local(t, u, qs), u.conj(), [n + q for q in qs])
    for ch, kraus in dissipators:
        t = _apply_channel(t, n, ch.qubit, kraus)
    for qs, u in unitaries_half:
        t = apply_local(apply_local(t, u, qs), u.conj(), [n + q for q in qs])
    return t


def _as_density(rho):
    if isinstance(rho, RegisterState):
        a = rho.amplitudes
        return np.outer(a, a.conj()), rho.n_qubits
    rho = np.asarray(rho, dtype=complex)
    n = round(math.log(rho.shape[0], 4))
    if rho.shape != (4**n, 4**n):
        raise ValueError("density matrix must be square with side 4**n")
    return rho, n


def check_density(rho, tol=1e-10):
    if not np.allclose(rho, rho.conj().T, atol=tol):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError("density matrix trace is not 1")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")


def _evolve_density(rho, segs, n, params, chans, dt):
    d = 4**n
    use_maps = n <= 2
    out = [rho]
    t = rho.reshape((4,) * (2 * n))
    for seg in segs:
        n_sub = max(1, math.ceil(seg.dt / dt - 1e-12))
        h = seg.dt / n_sub
        half = segment_local_unitaries(seg, params, h / 2)
        diss = [(ch, _gad_local(ch, h)) for ch in chans]
        diss = [(ch, k) for ch, k in diss if k]
        if use_maps:
            basis = np.eye(d * d, dtype=complex).reshape((4,) * (2 * n) + (d * d,))
            step = _strang_step(basis, n, half, diss).reshape(d * d, d * d)
            t = (np.linalg.matrix_power(step, n_sub) @ t.reshape(-1)).reshape(t.shape)
        else:
            for _ in range(n_sub):
                t = _strang_step(t, n, half, diss)
        out.append(t.reshape(d, d))
    return out


@dataclass
class LindbladResult:
    times: np.ndarray
    rhos: list
    dt: float
    halvings: int
    labels: list = field(default_factory=list)

    @property
    def final(self):
        return self.rhos[-1]

    def populations(self):
        return np.array([np.real(np.diag(r)) for r in self.rhos])

    def leakage(self):
        n = round(math.log(self.rhos[0].shape[0], 4))
        return self.populations()[:, leakage_mask(n)].sum(axis=1)


def lindblad_evolve(rho, schedule, params, chans=(), dt=0.05, sample_times=None, tol=1e-10, max_halvings=16):
    """Evolve a density matrix under the schedule plus per-DQD flip channels.

    Fixed steps use Strang splitting: half unitary step, exact generalized
    amplitude damping on every DQD, half unitary step. Both pieces are CPTP,
    so trace and positivity hold at every step. The step is halved until two
    successive runs agree to ``tol`` at every sample time.
    """
    rho, n = _as_density(rho)
    if n > MAX_LINDBLAD_QUBITS:
        raise GuardError(f"lindblad_evolve limited to {MAX_LINDBLAD_QUBITS} qubits, got {n}")
    check_density(rho)
    chans = list(chans)
    times = [float(schedule.total_duration)] if sample_times is None else sorted(float(x) for x in sample_times)
    segs = segments(schedule, n, params, None, breakpoints=times)
    ends = [0.0] + [s.t1 for s in segs]

    def run(step):
        states = _evolve_density(rho, segs, n, params, chans, step)
        return [states[int(np.argmin(np.abs(np.array(ends) - t)))] for t in times]

    prev = run(dt)
    for k in range(1, max_halvings + 1):
        cur = run(dt / 2**k)
        diff = max(float(np.abs(a - b).max()) for a, b in zip(prev, cur))
        if diff < tol:
            return LindbladResult(np.array(times), cur, dt / 2**k, k, basis_labels(n))
        prev = cur
    raise ConvergenceError(f"Lindblad step halving did not converge to {tol:g} (last change {diff:.3e})")


# ---------------------------------------------------------------------------
# trajectories


def trajectory_seeds(root_seed, n_traj):
    """Per-trajectory uint64 seeds: ``SeedSequence(root_seed, spawn_key=(i,))``, first word."""
    return np.array(
        [np.random.SeedSequence(root_seed, spawn_key=(i,)).generate_state(1, np.uint64)[0] for i in range(n_traj)],
        dtype=np.uint64,
    )


@dataclass
class TrajectoryResult:
    times: np.ndarray
    populations: np.ndarray  # (n_samples, d) ensemble mean
    stderr: np.ndarray
    leakage: np.ndarray
    leakage_stderr: np.ndarray
    n_jumps: np.ndarray
    jump_records: list  # per trajectory: [(time_ps, channel_label), ...]
    labels: list
    n_traj: int
    backend: str


def _fsum_mean(x):
    """Exactly rounded mean over axis 0, independent of trajectory order."""
    flat = x.reshape(x.shape[0], -1)
    return np.array([math.fsum(col) for col in flat.T]).reshape(x.shape[1:]) / x.shape[0]


def _no_jump_props(segs, n, params, ops, dt):
    decay = sum((op.conj().T @ op for op in ops), np.zeros((4**n, 4**n), complex))
    props, step_prop, step_end = [], [], []
    for seg in segs:
        n_sub = max(1, math.ceil(seg.dt / dt - 1e-12))
        h = seg.dt / n_sub
        gen = -1j * segment_hamiltonian(seg, n) / params.hbar - 0.5 * decay
        props.append(expm(gen * h))
        step_prop.extend([len(props) - 1] * n_sub)
        step_end.extend(seg.t0 + h * (k + 1) for k in range(n_sub))
    return np.array(props, dtype=complex), np.array(step_prop, dtype=np.int64), np.array(step_end)


def run_trajectories(
    state,
    schedule,
    params,
    chans=(),
    n_traj=1000,
    seed=0,
    dt=0.01,
    sample_times=None,
    max_jumps=64,
    backend=None,
    noise_to_signal=0.0,
):
    """Quantum-jump unraveling of the same channels :func:`lindblad_evolve` integrates.

    Deterministic given ``seed``. Optional ``noise_to_signal`` rescales every
    pulse amplitude per trajectory by ``1 + noise_to_signal * N(0, 1)``.
    ``backend=None`` picks numba for one-qubit registers when it is enabled and
    numpy otherwise; both kernels draw the same random numbers.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    n = state.n_qubits
    if n > MAX_TRAJECTORY_QUBITS:
        raise GuardError(f"run_trajectories limited to {MAX_TRAJECTORY_QUBITS} qubits, got {n}")
    if backend is None:
        backend = "numba" if _accel.use_numba() and 4**n <= NUMBA_TRAJECTORY_MAX_DIM else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    kernel = _tk.run_numba if backend == "numba" else _tk.run_numpy
    ops, op_labels = jump_operators(n, chans)
    jump_arr = np.array(ops, dtype=complex).reshape(len(ops), 4**n, 4**n)
    times = [float(schedule.total_duration)] if sample_times is None else sorted(float(x) for x in sample_times)
    seeds = trajectory_seeds(seed, n_traj)
    psi0 = np.ascontiguousarray(state.amplitudes, dtype=complex)

    def prepare(sched):
        segs = segments(sched, n, params, None, breakpoints=times)
        props, step_prop, step_end = _no_jump_props(segs, n, params, ops, dt)
        sample_after = np.array(
            [-1 if t <= 0 else int(np.argmin(np.abs(step_end - t))) for t in times], dtype=np.int64
        )
        return props, step_prop, step_end, sample_after

    if noise_to_signal == 0:
        props, step_prop, step_end, sample_after = prepare(schedule)
        pops, n_jumps, jstep, jop = kernel(psi0, props, step_prop, jump_arr, sample_after, seeds, max_jumps)
    else:
        from .pulses import jitter_amplitudes

        parts = []
        for i in range(n_traj):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, 1)))
            props, step_prop, step_end, sample_after = prepare(jitter_amplitudes(schedule, noise_to_signal, rng))
            parts.append(kernel(psi0, props, step_prop, jump_arr, sample_after, seeds[i : i + 1], max_jumps))
        pops = np.concatenate([p[0] for p in parts])
        n_jumps = np.concatenate([p[1] for p in parts])
        jstep = np.concatenate([p[2] for p in parts])
        jop = np.concatenate([p[3] for p in parts])

    mean = _fsum_mean(pops)
    sq = _fsum_mean(pops**2)
    se = np.sqrt(np.maximum(sq - mean**2, 0.0) / max(1, n_traj - 1))
    leak_per = pops[:, :, leakage_mask(n)].sum(axis=2)
    leak = _fsum_mean(leak_per)
    leak_se = np.sqrt(np.maximum(_fsum_mean(leak_per**2) - leak**2, 0.0) / max(1, n_traj - 1))
    records = []
    for t in range(n_traj):
        k = min(int(n_jumps[t]), max_jumps)
        records.append([(float(step_end[jstep[t, j]]), op_labels[jop[t, j]]) for j in range(k)])
    return TrajectoryResult(
        np.array(times), mean, se, leak, leak_se, n_jumps, records, basis_labels(n), n_traj, backend
    )
