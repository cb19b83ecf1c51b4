"""State spaces and exact propagation of piecewise-constant qubit Hamiltonians.

Each qubit is two DQDs with one electron apiece. Its local space has four
levels::

    C0 = |+->   C1 = |-+>   (computational, antisymmetrized two-electron states)
    LP = |++>   LM = |-->   (leakage)

A register of ``n`` qubits is a complex vector of length ``4**n``; qubit 0 is
the most significant base-4 digit.

Units: energies in meV, times in ps, hbar in meV*ps. Time evolution uses
``U = exp(-i H t / hbar)``.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .pulses import ScheduleError, validate_schedule

HBAR_MEV_PS = 0.658212
COULOMB_K_MEV_NM = 1439.96
MATERIALS = ("piezoelectric_active", "deformation_only")
MAX_UNITARY_QUBITS = 4


class Level(enum.IntEnum):
    C0 = 0
    C1 = 1
    LP = 2
    LM = 3

    @property
    def dqd_signs(self):
        """Pseudo-spin of (DQD 1, DQD 2): +1 for |+>, -1 for |->."""
        return {Level.C0: (1, -1), Level.C1: (-1, 1), Level.LP: (1, 1), Level.LM: (-1, -1)}[self]


LEVEL_NAMES = ("C0", "C1", "LP", "LM")


class GuardError(ValueError):
    """A dimension guard was exceeded."""


@dataclass(frozen=True)
class DeviceParams:
    hbar: float = HBAR_MEV_PS
    A_idle: float = 0.0
    P_idle: float = 0.0
    temperature_kT: float = 0.08617  # 1 K
    material: str = "piezoelectric_active"
    coulomb_constant_k: float = COULOMB_K_MEV_NM
    kappa: float = 12.9  # GaAs placeholder

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name != "material" and not math.isfinite(v):
                raise ValueError(f"device.{f.name} must be finite, got {v!r}")
        if self.hbar <= 0:
            raise ValueError("device.hbar must be > 0")
        if self.temperature_kT < 0:
            raise ValueError("device.temperature_kT must be >= 0")
        if self.kappa < 1:
            raise ValueError("device.kappa must be >= 1")
        if self.material not in MATERIALS:
            raise ValueError(f"device.material must be one of {MATERIALS}")

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class HamiltonianCoeffs:
    A: float = 0.0
    P: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.A) and math.isfinite(self.P)):
            raise ValueError(f"non-finite Hamiltonian coefficients A={self.A!r}, P={self.P!r}")


# ---------------------------------------------------------------------------
# register states


def _digits(n):
    """(4**n, n) array of base-4 digits, qubit 0 first."""
    idx = np.arange(4**n)
    return np.stack([(idx // 4 ** (n - 1 - q)) % 4 for q in range(n)], axis=1)


def leakage_mask(n):
    return np.any(_digits(n) >= 2, axis=1)


def computational_indices(n):
    """Register indices of the 2**n computational states, in binary order."""
    out = []
    for bits in itertools.product((0, 1), repeat=n):
        out.append(sum(b * 4 ** (n - 1 - q) for q, b in enumerate(bits)))
    return np.array(out, dtype=int)


def basis_labels(n):
    return ["".join(LEVEL_NAMES[d] for d in row) for row in _digits(n)]


@dataclass(frozen=True, eq=False)
class RegisterState:
    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 4**self.n_qubits:
            raise ValueError(f"expected {4 ** self.n_qubits} amplitudes, got {amps.size}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, levels):
        levels = [Level[l] if isinstance(l, str) else Level(l) for l in levels]
        n = len(levels)
        amps = np.zeros(4**n, complex)
        amps[sum(int(l) * 4 ** (n - 1 - q) for q, l in enumerate(levels))] = 1.0
        return cls(n, amps)

    @classmethod
    def from_qubits(cls, qubit_amps):
        """Product state from per-qubit ``(a, b)`` pairs, normalized as ``(|a|^2+|b|^2)^-1/2 (a|C0> + b|C1>)``."""
        vec = np.ones(1, complex)
        for a, b in qubit_amps:
            nrm = math.sqrt(abs(a) ** 2 + abs(b) ** 2)
            if nrm == 0:
                raise ValueError("qubit amplitudes (0, 0) cannot be normalized")
            vec = np.kron(vec, np.array([a, b, 0, 0], complex) / nrm)
        return cls(len(qubit_amps), vec)

    @property
    def dim(self):
        return self.amplitudes.size

    def norm(self):
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self):
        return np.abs(self.amplitudes) ** 2

    def leakage(self):
        return float(self.probabilities()[leakage_mask(self.n_qubits)].sum())

    def tensor(self):
        return self.amplitudes.reshape((4,) * self.n_qubits)

    def reduced_density(self, qubit):
        """4x4 reduced density matrix of one qubit."""
        t = np.moveaxis(self.tensor(), qubit, 0).reshape(4, -1)
        return t @ t.conj().T

    def overlap(self, other):
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def phase_insensitive_fidelity(target, actual):
    """``|tr(target^dag actual)| / dim``, blind to global phase."""
    target = np.asarray(target)
    return float(abs(np.trace(target.conj().T @ np.asarray(actual))) / target.shape[0])


# ---------------------------------------------------------------------------
# Hamiltonians and closed-form exponentials


def build_hamiltonian(c):
    """2x2 qubit Hamiltonian ``A sigma_x + P sigma_z`` on {C0, C1}."""
    if not isinstance(c, HamiltonianCoeffs):
        c = HamiltonianCoeffs(*c)
    return np.array([[c.P, c.A], [c.A, -c.P]], dtype=float)


def su2_propagator(A, P, dt, hbar):
    """``exp(-i (A sx + P sz) dt / hbar)`` as ``cos(th) I - i sin(th) n.sigma``."""
    mag = math.hypot(A, P)
    th = mag * dt / hbar
    if mag == 0.0 or th == 0.0:
        return np.eye(2, dtype=complex)
    nx, nz = A / mag, P / mag
    c, s = math.cos(th), math.sin(th)
    return np.array([[c - 1j * s * nz, -1j * s * nx], [-1j * s * nx, c + 1j * s * nz]])


def qubit_operator(block):
    """Embed a 2x2 computational-block operator as a 4x4 local operator (identity on leakage)."""
    out = np.eye(4, dtype=complex)
    out[:2, :2] = block
    return out


_PAIR_COMP = np.array([0, 1, 4, 5])  # |C0C0>, |C0C1>, |C1C0>, |C1C1> in the 16-dim pair space
_SWAP4 = np.eye(4)[[0, 2, 1, 3]]


def exchange_generator(J):
    """4x4 exchange generator ``(J/2)(SWAP - I)`` on the two-qubit computational block."""
    if not math.isfinite(J):
        raise ValueError("exchange coupling must be finite")
    return 0.5 * J * (_SWAP4 - np.eye(4))


def exchange_block_propagator(area):
    """Closed-form ``exp(-i area (SWAP - I)/2) = P_sym + e^{i area} P_anti`` on the 4x4 block."""
    p_anti = 0.5 * (np.eye(4) - _SWAP4)
    return np.eye(4, dtype=complex) + (np.exp(1j * area) - 1.0) * p_anti


def pair_operator(block4):
    """Embed a 4x4 two-qubit computational-block operator into the 16-dim pair space."""
    out = np.eye(16, dtype=complex)
    out[np.ix_(_PAIR_COMP, _PAIR_COMP)] = block4
    return out


def single_qubit_hamiltonian4(A, P):
    h = np.zeros((4, 4))
    h[:2, :2] = build_hamiltonian(HamiltonianCoeffs(A, P))
    return h


def exchange_hamiltonian16(J):
    h = np.zeros((16, 16))
    h[np.ix_(_PAIR_COMP, _PAIR_COMP)] = exchange_generator(J)
    return h


# ---------------------------------------------------------------------------
# local operator application


def apply_local(tensor, op, qubits):
    """Apply a ``4**k`` square operator on the given tensor axes.

    ``tensor`` may carry extra trailing axes (batches of states); only the
    listed axes are contracted.
    """
    k = len(qubits)
    opt = np.asarray(op).reshape((4,) * (2 * k))
    out = np.tensordot(opt, tensor, axes=(list(range(k, 2 * k)), list(qubits)))
    return np.moveaxis(out, list(range(k)), list(qubits))


def embed(op, qubits, n):
    """Full ``4**n`` matrix of a local operator acting on ``qubits``."""
    eye = np.eye(4**n, dtype=complex).reshape((4,) * n + (4**n,))
    return apply_local(eye, op, qubits).reshape(4**n, 4**n)


# ---------------------------------------------------------------------------
# schedules -> constant segments


@dataclass(frozen=True)
class Segment:
    """Constant-Hamiltonian slice of a schedule.

    ``singles`` maps qubit -> (A, P); ``pairs`` maps (q, q+1) -> J. Qubits
    not named in either are idle and carry (A_idle, P_idle).
    """

    t0: float
    dt: float
    n_sub: int
    singles: dict
    pairs: dict

    @property
    def t1(self):
        return self.t0 + self.dt


def segments(schedule, n_qubits, params, dt_max=None, breakpoints=()):
    """Split ``schedule`` into constant pieces, each sliced into ``n_sub`` steps <= dt_max."""
    violations = validate_schedule(schedule, n_qubits)
    if violations:
        raise ScheduleError(violations)
    times = {0.0, float(schedule.total_duration)}
    for p in schedule.pulses:
        times.update((p.start, p.end))
    times.update(float(b) for b in breakpoints if 0.0 <= b <= schedule.total_duration)
    times = sorted(times)
    out = []
    for t0, t1 in zip(times, times[1:]):
        dt = t1 - t0
        if dt <= 0:
            continue
        mid = 0.5 * (t0 + t1)
        singles, pairs = {}, {}
        for p in schedule.pulses:
            if not (p.start <= mid < p.end):
                continue
            el = p.electrode
            if el.kind == "E_inter":
                pairs[el.qubits] = pairs.get(el.qubits, 0.0) + p.amplitude
            else:
                q = el.qubits[0]
                A, P = singles.get(q, (0.0, 0.0))
                if el.kind == "E_intra":
                    A += p.amplitude
                else:
                    P += p.amplitude if el.dqd == 0 else -p.amplitude
                singles[q] = (A, P)
        busy = set(singles) | {q for pr in pairs for q in pr}
        for q in range(n_qubits):
            if q not in busy:
                singles[q] = (params.A_idle, params.P_idle)
        n_sub = 1 if dt_max is None else max(1, math.ceil(dt / dt_max - 1e-12))
        out.append(Segment(t0, dt, n_sub, singles, pairs))
    return out


def _clusters(seg):
    parent = {}

    def find(q):
        parent.setdefault(q, q)
        while parent[q] != q:
            parent[q] = parent[parent[q]]
            q = parent[q]
        return q

    for q in seg.singles:
        find(q)
    for a, b in seg.pairs:
        parent[find(a)] = find(b)
    groups = {}
    for q in list(parent):
        groups.setdefault(find(q), []).append(q)
    return sorted(sorted(g) for g in groups.values())


def cluster_hamiltonian(seg, qubits):
    """Dense generator of one coupled cluster of qubits."""
    k = len(qubits)
    pos = {q: i for i, q in enumerate(qubits)}
    h = np.zeros((4**k, 4**k), complex)
    for q in qubits:
        if q in seg.singles:
            A, P = seg.singles[q]
            if A or P:
                h += embed(single_qubit_hamiltonian4(A, P), [pos[q]], k)
    for pr, J in seg.pairs.items():
        if pr[0] in pos and J:
            h += embed(exchange_hamiltonian16(J), [pos[pr[0]], pos[pr[1]]], k)
    return h


def segment_hamiltonian(seg, n_qubits):
    """Full-register Hermitian generator of a segment."""
    return cluster_hamiltonian(seg, list(range(n_qubits)))


def segment_local_unitaries(seg, params, dt=None):
    """Local propagators ``[(qubits, U), ...]`` for one step of a segment.

    Single-qubit clusters and bare exchange pairs use closed forms; clusters
    where exchange and single-qubit drives overlap are exponentiated exactly
    through their Hermitian eigendecomposition.
    """
    dt = seg.dt / seg.n_sub if dt is None else dt
    ops = []
    for cl in _clusters(seg):
        if len(cl) == 1:
            A, P = seg.singles.get(cl[0], (0.0, 0.0))
            if A or P:
                ops.append((cl, qubit_operator(su2_propagator(A, P, dt, params.hbar))))
            continue
        bare_pair = len(cl) == 2 and all(seg.singles.get(q, (0.0, 0.0)) == (0.0, 0.0) for q in cl)
        if bare_pair and tuple(cl) in seg.pairs:
            area = seg.pairs[tuple(cl)] * dt / params.hbar
            ops.append((cl, pair_operator(exchange_block_propagator(area))))
            continue
        if len(cl) > MAX_UNITARY_QUBITS:
            raise GuardError(f"coupled cluster of {len(cl)} qubits exceeds guard {MAX_UNITARY_QUBITS}")
        w, v = np.linalg.eigh(cluster_hamiltonian(seg, cl))
        ops.append((cl, (v * np.exp(-1j * w * dt / params.hbar)) @ v.conj().T))
    return ops


# ---------------------------------------------------------------------------
# propagation


def _check_qubit(state, qubit):
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for a {state.n_qubits}-qubit register")


def propagate_constant(state, qubit, c, dt, params):
    """Evolve one qubit for ``dt`` under constant (A, P); leakage amplitudes are untouched."""
    _check_qubit(state, qubit)
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if not isinstance(c, HamiltonianCoeffs):
        c = HamiltonianCoeffs(*c)
    u = qubit_operator(su2_propagator(c.A, c.P, dt, params.hbar))
    out = apply_local(state.tensor(), u, [qubit])
    return RegisterState(state.n_qubits, out.reshape(-1))


def _evolve_tensor(tensor, segs, params):
    for seg in segs:
        ops = segment_local_unitaries(seg, params)
        for _ in range(seg.n_sub):
            for qs, u in ops:
                tensor = apply_local(tensor, u, qs)
    return tensor


def propagate_schedule(state, schedule, params, dt_max=1.0):
    """Time-ordered product of constant-slice propagators over ``schedule``."""
    if dt_max <= 0:
        raise ValueError("dt_max must be > 0")
    segs = segments(schedule, state.n_qubits, params, dt_max)
    out = _evolve_tensor(state.tensor(), segs, params)
    return RegisterState(state.n_qubits, out.reshape(-1))


def unitary_of_schedule(schedule, n_qubits, params, dt_max=1.0):
    """Dense ``4**n`` propagator; column j is the evolved basis vector j."""
    if n_qubits > MAX_UNITARY_QUBITS:
        raise GuardError(f"unitary_of_schedule limited to {MAX_UNITARY_QUBITS} qubits, got {n_qubits}")
    if dt_max <= 0:
        raise ValueError("dt_max must be > 0")
    d = 4**n_qubits
    segs = segments(schedule, n_qubits, params, dt_max)
    eye = np.eye(d, dtype=complex).reshape((4,) * n_qubits + (d,))
    return _evolve_tensor(eye, segs, params).reshape(d, d)


def computational_block(U, n_qubits):
    idx = computational_indices(n_qubits)
    return U[np.ix_(idx, idx)]


def propagate_sampled(state, schedule, params, times, dt_max=1.0):
    """States at each of ``times`` (ps, within the schedule window), in order."""
    times = sorted(float(t) for t in times)
    if dt_max <= 0:
        raise ValueError("dt_max must be > 0")
    segs = segments(schedule, state.n_qubits, params, dt_max, breakpoints=times)
    tensor = state.tensor()
    out, k = [], 0
    while k < len(times) and times[k] <= 0:
        out.append(RegisterState(state.n_qubits, tensor.reshape(-1)))
        k += 1
    for seg in segs:
        tensor = _evolve_tensor(tensor, [seg], params)
        while k < len(times) and times[k] <= seg.t1 + 1e-9:
            out.append(RegisterState(state.n_qubits, tensor.reshape(-1)))
            k += 1
    if k != len(times):
        raise ValueError("sample times must lie within [0, total_duration]")
    return out
