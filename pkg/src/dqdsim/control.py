"""Rectangular-pulse calibration for the single-qubit operations.

Only the amplitude-duration product is calibrated. An E_intra pulse of area
``theta`` applies ``exp(-i theta sigma_x)``; a T pulse of area ``theta``
applies ``exp(-i theta sigma_z)``, i.e. a relative phase ``2 theta`` between
C0 and C1.
"""
from __future__ import annotations

import math

import numpy as np

from .core import RegisterState, computational_block, phase_insensitive_fidelity, unitary_of_schedule
from .pulses import ControlPulse, Electrode, PulseSchedule, pulse_area

__all__ = [
    "CalibrationError",
    "calibrate_amplitude_flip",
    "calibrate_amplitude_rotation",
    "calibrate_phase_shift",
    "pulse_area",
    "NOOP_DURATION",
    "verify_pulse",
]

NOOP_DURATION = 1e-12  # ps, placeholder width of a zero-area pulse


class CalibrationError(RuntimeError):
    def __init__(self, gate, fidelity, tol):
        self.gate, self.fidelity, self.tol = gate, fidelity, tol
        super().__init__(f"calibration of {gate} reached fidelity {fidelity:.3e}, needs > 1 - {tol:g}")


def calibrate_amplitude_rotation(area, A_max, params, qubit=0, start=0.0):
    """E_intra pulse at ``A_max`` with the requested signed area."""
    if not A_max > 0:
        raise ValueError("A_max must be > 0")
    if area == 0:
        return ControlPulse(Electrode.E_intra(qubit), start, NOOP_DURATION, 0.0)
    return ControlPulse(
        Electrode.E_intra(qubit), start, abs(area) * params.hbar / A_max, math.copysign(A_max, area)
    )


def calibrate_amplitude_flip(A_max, params, qubit=0, start=0.0):
    """Amplitude flip |C0> -> |C1>: area pi/2, duration pi hbar / (2 A_max)."""
    return calibrate_amplitude_rotation(math.pi / 2, A_max, params, qubit, start)


def calibrate_phase_shift(phi, P_max, params, qubit=0, start=0.0):
    """T pulse on DQD 0 giving relative phase ``phi`` between C0 and C1.

    ``phi == 0`` yields a degenerate zero-amplitude pulse of width
    ``NOOP_DURATION``; negative ``phi`` flips the amplitude sign.
    """
    if not P_max > 0:
        raise ValueError("P_max must be > 0")
    if not math.isfinite(phi):
        raise ValueError("phi must be finite")
    if phi == 0:
        return ControlPulse(Electrode.T(qubit, 0), start, NOOP_DURATION, 0.0)
    return ControlPulse(Electrode.T(qubit, 0), start, abs(phi) * params.hbar / (2 * P_max), math.copysign(P_max, phi))


def target_amplitude_rotation(area):
    c, s = math.cos(area), math.sin(area)
    return np.array([[c, -1j * s], [-1j * s, c]])


def target_phase_shift(phi):
    return np.diag([np.exp(-0.5j * phi), np.exp(0.5j * phi)])


def verify_pulse(pulse, target2, params, n_qubits=1):
    """Simulate one pulse; return the phase-insensitive fidelity against a 2x2 target on its qubit."""
    q = pulse.electrode.qubits[0]
    U = unitary_of_schedule(PulseSchedule((pulse,)), n_qubits, params)
    full = np.ones((1, 1))
    for i in range(n_qubits):
        full = np.kron(full, target2 if i == q else np.eye(2))
    return phase_insensitive_fidelity(full, computational_block(U, n_qubits))


def relative_phase(state, qubit=0):
    """arg(b / a) for a single-qubit register ``a|C0> + b|C1>``."""
    rho = state.reduced_density(qubit) if isinstance(state, RegisterState) else state
    return float(np.angle(rho[1, 0]))
