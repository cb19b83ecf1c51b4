"""Logical gates as pulse schedules.

Two-qubit coupling is Heisenberg exchange on the computational block,
``(J/2)(SWAP - I)``: an E_inter pulse of area pi is SWAP, area pi/2 is
sqrt(SWAP), both without stray phases.

XOR is built from sqrt(SWAP) and pi/2 phase shifts, which together give a
controlled-Z::

    CZ = Rz_c(pi/2) Rz_t(-pi/2) . sqrtSWAP . Rz_c(pi/2) Rz_c(pi/2) . sqrtSWAP

and a Hadamard-like basis change on the target, ``Rz(pi/2) Rx(pi/2) Rz(pi/2)``,
turns CZ into CNOT. The basis change needs one amplitude (sigma_x) rotation:
sqrt(SWAP) and sigma_z rotations both conserve the number of qubits in C1,
which CNOT does not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .control import calibrate_amplitude_rotation, calibrate_phase_shift
from .core import (
    RegisterState,
    apply_local,
    computational_block,
    exchange_generator,
    pair_operator,
    qubit_operator,
    phase_insensitive_fidelity,
    propagate_schedule,
    unitary_of_schedule,
)
from .pulses import ControlPulse, Electrode, PulseSchedule, sequence

__all__ = [
    "GATE_NAMES",
    "GateAmplitudes",
    "GateSpec",
    "exchange_generator",
    "gate_target",
    "ideal_state",
    "synthesize",
    "synthesize_program",
    "transport",
    "verify_gate",
]

GATE_NAMES = ("AmpFlip", "PhaseFlip", "PhaseShift", "Swap", "SqrtSwap", "Xor", "Transport")
_ARITY = {"AmpFlip": 1, "PhaseFlip": 1, "PhaseShift": 1, "Swap": 2, "SqrtSwap": 2, "Xor": 2}


@dataclass(frozen=True)
class GateAmplitudes:
    """Drive levels in meV used by the synthesizer."""

    A_max: float = 1.0
    P_max: float = 1.0
    J_max: float = 1.0

    def __post_init__(self):
        for name in ("A_max", "P_max", "J_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite energy, got {v!r}")


@dataclass(frozen=True)
class GateSpec:
    """A named logical operation.

    ``qubits`` lists targets (control first for Xor). Transport uses
    ``qubits = (from, to)``. PhaseShift reads its angle from ``phi``.
    """

    name: str
    qubits: tuple
    phi: float = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.name not in GATE_NAMES:
            raise ValueError(f"unknown gate {self.name!r}; choose from {GATE_NAMES}")
        if self.name == "Transport":
            if len(self.qubits) != 2:
                raise ValueError("Transport needs (from, to)")
        elif len(self.qubits) != _ARITY[self.name]:
            raise ValueError(f"{self.name} acts on {_ARITY[self.name]} qubit(s), got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise ValueError("qubit indices must be non-negative")
        if self.name in ("Swap", "SqrtSwap", "Xor"):
            a, b = self.qubits
            if abs(a - b) != 1:
                raise ValueError(f"{self.name} needs adjacent qubits, got {self.qubits}")
        if self.name == "PhaseShift" and (self.phi is None or not math.isfinite(self.phi)):
            raise ValueError("PhaseShift needs a finite phi")

    def __str__(self):
        args = ",".join(str(q) for q in self.qubits)
        if self.name == "PhaseShift":
            args += f",{self.phi!r}"
        return f"{self.name}({args})"

    def to_dict(self):
        d = {"gate": self.name, "qubits": list(self.qubits)}
        if self.phi is not None:
            d["phi"] = self.phi
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {"gate", "qubits", "phi"}
        if unknown:
            raise ValueError(f"unknown gate field(s) {sorted(unknown)}")
        phi = d.get("phi")
        return cls(str(d["gate"]), tuple(d.get("qubits", ())), None if phi is None else float(phi))


def _single(pulse):
    return PulseSchedule((pulse,))


def _exchange(q0, q1, area, amps, params):
    dur = area * params.hbar / amps.J_max
    return _single(ControlPulse(Electrode.E_inter(q0, q1), 0.0, dur, amps.J_max))


def _phase(q, phi, amps, params):
    return _single(calibrate_phase_shift(phi, amps.P_max, params, qubit=q))


def _amp(q, area, amps, params):
    return _single(calibrate_amplitude_rotation(area, amps.A_max, params, qubit=q))


def _hadamard_like(q, amps, params):
    return sequence(_phase(q, math.pi / 2, amps, params), _amp(q, math.pi / 4, amps, params), _phase(q, math.pi / 2, amps, params))


def synthesize(spec, params, amps=GateAmplitudes()):
    """Pulse schedule realizing ``spec``; all pulses start from t = 0 and run back to back."""
    name, qs = spec.name, spec.qubits
    if name == "AmpFlip":
        return _amp(qs[0], math.pi / 2, amps, params)
    if name == "PhaseFlip":
        return _phase(qs[0], math.pi, amps, params)
    if name == "PhaseShift":
        return _phase(qs[0], spec.phi, amps, params)
    if name == "Swap":
        return _exchange(*qs, math.pi, amps, params)
    if name == "SqrtSwap":
        return _exchange(*qs, math.pi / 2, amps, params)
    if name == "Xor":
        c, t = qs
        half = math.pi / 2
        sq = _exchange(c, t, half, amps, params)
        cz = sequence(
            sq,
            _phase(c, half, amps, params),
            _phase(c, half, amps, params),
            sq,
            _phase(c, half, amps, params),
            _phase(t, -half, amps, params),
        )
        h = _hadamard_like(t, amps, params)
        return sequence(h, cz, h)
    if name == "Transport":
        a, b = qs
        step = 1 if b > a else -1
        return sequence(*(_exchange(q, q + step, math.pi, amps, params) for q in range(a, b, step)))
    raise ValueError(name)  # unreachable, GateSpec validates names


def synthesize_program(specs, params, amps=GateAmplitudes()):
    return sequence(*(synthesize(s, params, amps) for s in specs))


def gate_target(spec):
    """Ideal unitary on the computational block of the gate's own qubits (binary order)."""
    name = spec.name
    if name == "AmpFlip":
        return np.array([[0, 1], [1, 0]], complex)
    if name == "PhaseFlip":
        return np.diag([1, -1]).astype(complex)
    if name == "PhaseShift":
        return np.diag([1, np.exp(1j * spec.phi)])
    if name == "Swap":
        return np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    if name == "SqrtSwap":
        s = np.eye(4)[[0, 2, 1, 3]]
        return 0.5 * (1 + 1j) * np.eye(4) + 0.5 * (1 - 1j) * s
    if name == "Xor":
        c, t = spec.qubits
        cnot = np.eye(4, dtype=complex)[[0, 1, 3, 2]]
        if c > t:  # binary order follows qubit index, control is the low bit
            cnot = np.eye(4, dtype=complex)[[0, 3, 2, 1]]
        return cnot
    raise ValueError(f"no fixed target for {name}")


def local_copy(spec):
    """Same gate relabeled onto qubits 0..k-1, keeping relative order."""
    if spec.name == "Transport":
        a, b = spec.qubits
        lo = min(a, b)
        return GateSpec("Transport", (a - lo, b - lo))
    lo = min(spec.qubits)
    return GateSpec(spec.name, tuple(q - lo for q in spec.qubits), spec.phi)


def verify_gate(spec, params, amps=GateAmplitudes()):
    """Phase-insensitive fidelity of the synthesized gate on its computational block."""
    loc = local_copy(spec)
    n = max(loc.qubits) + 1
    U = unitary_of_schedule(synthesize(loc, params, amps), n, params)
    return phase_insensitive_fidelity(gate_target(loc), computational_block(U, n))


def transport(state, src, dst, params, amps=GateAmplitudes(), dt_max=1.0):
    """Move the logical state at ``src`` to ``dst`` with adjacent SWAPs."""
    n = state.n_qubits
    if not (0 <= src < n and 0 <= dst < n):
        raise IndexError(f"transport {src}->{dst} out of range for {n} qubits")
    if src == dst:
        return RegisterState(n, state.amplitudes), PulseSchedule()
    sched = synthesize(GateSpec("Transport", (src, dst)), params, amps)
    return propagate_schedule(state, sched, params, dt_max), sched


def _ideal_local(spec):
    if spec.name == "Transport":
        a, b = spec.qubits
        step = 1 if b > a else -1
        swap = pair_operator(gate_target(GateSpec("Swap", (0, 1))))
        return [((min(q, q + step), max(q, q + step)), swap) for q in range(a, b, step)]
    loc = local_copy(spec)
    target = gate_target(loc)
    qs = tuple(sorted(spec.qubits))
    return [(qs, qubit_operator(target) if len(qs) == 1 else pair_operator(target))]


def ideal_state(state, specs):
    """Apply the ideal gate targets of a program; leakage amplitudes are left alone."""
    t = state.tensor()
    for spec in specs:
        for qs, op in _ideal_local(spec):
            if max(qs) >= state.n_qubits:
                raise IndexError(f"{spec} addresses qubit {max(qs)} of a {state.n_qubits}-qubit register")
            t = apply_local(t, op, list(qs))
    return RegisterState(state.n_qubits, t.reshape(-1))
