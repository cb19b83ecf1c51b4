import math

import numpy as np
import pytest

from dqdsim.control import (
    NOOP_DURATION,
    calibrate_amplitude_flip,
    calibrate_amplitude_rotation,
    calibrate_phase_shift,
    relative_phase,
    target_amplitude_rotation,
    target_phase_shift,
    verify_pulse,
)
from dqdsim.core import DeviceParams, RegisterState, propagate_schedule, unitary_of_schedule
from dqdsim.gates import GateAmplitudes, GateSpec, synthesize
from dqdsim.pulses import ControlPulse, PulseSchedule


def run(state, pulses, params):
    return propagate_schedule(state, PulseSchedule(tuple(pulses)), params)


def test_flip_duration_examples(params):
    # pi * hbar / 2 = 1.0339169918523226 meV ps
    assert calibrate_amplitude_flip(1.0339, params).duration == pytest.approx(1.0, abs=1e-4)
    assert calibrate_amplitude_flip(1.0, params).duration == pytest.approx(1.0339169918523226, rel=1e-15)
    d1 = calibrate_amplitude_flip(0.8, params).duration
    assert calibrate_amplitude_flip(1.6, params).duration == pytest.approx(d1 / 2, rel=1e-15)
    with pytest.raises(ValueError):
        calibrate_amplitude_flip(0.0, params)


def test_flip_round_trip(params):
    p = calibrate_amplitude_flip(0.9, params)
    out = run(RegisterState.basis(["C0"]), [p], params)
    assert abs(out.amplitudes[1]) == pytest.approx(1.0, abs=1e-10)
    twice = run(RegisterState.basis(["C0"]), [p, p.shifted(p.duration)], params)
    assert abs(twice.amplitudes[0]) == pytest.approx(1.0, abs=1e-10)


def test_phase_shift_pi(params):
    p = calibrate_phase_shift(math.pi, 1.0339, params)
    # area pi/2 at 1.0339 meV takes 1.0 ps; the relative phase is twice the area
    assert p.duration == pytest.approx(1.0, abs=1e-4)
    out = run(RegisterState.from_qubits([(1, 1)]), [p], params)
    assert abs(relative_phase(out)) == pytest.approx(math.pi, abs=1e-10)


@pytest.mark.parametrize("phi", [math.pi / 2, -math.pi / 2, 0.3, 2.9])
def test_phase_shift_relative_phase(params, phi):
    out = run(RegisterState.from_qubits([(1, 1)]), [calibrate_phase_shift(phi, 0.7, params)], params)
    assert relative_phase(out) == pytest.approx(phi, abs=1e-10)


def test_phase_zero_is_noop(params):
    p = calibrate_phase_shift(0.0, 1.0, params)
    assert p.amplitude == 0.0 and p.duration == NOOP_DURATION
    assert verify_pulse(p, np.eye(2), params) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        calibrate_phase_shift(1.0, -1.0, params)


@pytest.mark.parametrize("area", [0.1, math.pi / 4, -1.2, math.pi / 2])
def test_calibration_round_trip_fidelity(params, area):
    assert verify_pulse(calibrate_amplitude_rotation(area, 0.8, params), target_amplitude_rotation(area), params) > 1 - 1e-10
    assert verify_pulse(calibrate_phase_shift(area, 0.8, params), target_phase_shift(area), params, n_qubits=2) > 1 - 1e-10


def test_area_additivity(params):
    p = calibrate_amplitude_rotation(1.1, 0.6, params)
    half = p.duration / 2
    a = ControlPulse(p.electrode, 0.0, half, p.amplitude)
    b = ControlPulse(p.electrode, half, half, p.amplitude)
    u1 = unitary_of_schedule(PulseSchedule((p,)), 1, params)
    u2 = unitary_of_schedule(PulseSchedule((a, b)), 1, params)
    assert np.abs(u1 - u2).max() < 1e-12


@pytest.mark.parametrize("name,qubits", [("AmpFlip", (0,)), ("PhaseFlip", (1,)), ("Xor", (0, 1)), ("SqrtSwap", (1, 2))])
def test_idle_regime_guard(params, name, qubits):
    """Idle residuals at hbar / (100 T) barely move gate fidelities."""
    from dqdsim.core import computational_block, phase_insensitive_fidelity

    spec = GateSpec(name, qubits)
    sched = synthesize(spec, params, GateAmplitudes())
    n = 3
    clean = unitary_of_schedule(sched, n, params)
    eps = params.hbar / (100 * sched.total_duration)
    noisy = unitary_of_schedule(sched, n, params.with_(A_idle=eps, P_idle=eps))
    f = phase_insensitive_fidelity(computational_block(clean, n), computational_block(noisy, n))
    assert 1 - f < 1e-3
