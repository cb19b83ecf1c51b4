"""Simulator for a charge-qubit register built from double quantum dots (DQDs).

Each qubit is a pair of DQDs holding one electron each; the computational
states are |+-> and |-+> and the other two configurations are leakage.
"""
from .core import DeviceParams, GuardError, Level, RegisterState, propagate_schedule, unitary_of_schedule
from .gates import GateAmplitudes, GateSpec, synthesize, synthesize_program, verify_gate
from .pulses import ControlPulse, Electrode, PulseSchedule

__version__ = "0.1.0"

__all__ = [
    "ControlPulse",
    "DeviceParams",
    "Electrode",
    "GateAmplitudes",
    "GateSpec",
    "GuardError",
    "Level",
    "PulseSchedule",
    "RegisterState",
    "propagate_schedule",
    "synthesize",
    "synthesize_program",
    "unitary_of_schedule",
    "verify_gate",
]
