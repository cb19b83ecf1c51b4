"""Piecewise-constant electrode waveforms.

Three electrode families drive the Hamiltonian coefficients directly (the
voltage-to-energy map is the identity, amplitudes are given in meV):

* ``T(q, dqd)`` tunnel gate on one DQD of qubit ``q``: drives the sigma_z
  coefficient P. A pulse on DQD 0 adds ``+amplitude``; DQD 1 holds the
  complementary pseudo-spin in both basis states, so it adds ``-amplitude``.
* ``E_intra(q)`` exchange gate between the two DQDs of qubit ``q``: drives A.
* ``E_inter(q, q+1)`` exchange gate between neighbouring qubits: drives J.

Pulse intervals are half-open, ``[start, start + duration)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

KINDS = ("T", "E_intra", "E_inter")


class ScheduleError(ValueError):
    """A schedule failed validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(v.message for v in self.violations))


@dataclass(frozen=True, order=True)
class Electrode:
    kind: str
    qubits: tuple
    dqd: int = 0

    @classmethod
    def T(cls, qubit, dqd=0):
        return cls("T", (int(qubit),), int(dqd))

    @classmethod
    def E_intra(cls, qubit):
        return cls("E_intra", (int(qubit),))

    @classmethod
    def E_inter(cls, q0, q1):
        q0, q1 = sorted((int(q0), int(q1)))
        return cls("E_inter", (q0, q1))

    @property
    def label(self):
        if self.kind == "T":
            return f"T({self.qubits[0]},{self.dqd})"
        return f"{self.kind}({','.join(str(q) for q in self.qubits)})"

    @classmethod
    def parse(cls, text):
        m = re.fullmatch(r"\s*(T|E_intra|E_inter)\(\s*(\d+)\s*(?:,\s*(\d+)\s*)?\)\s*", text)
        if m is None:
            raise ValueError(f"cannot parse electrode {text!r}")
        kind, a, b = m.groups()
        if kind == "T":
            return cls.T(int(a), int(b or 0))
        if kind == "E_intra":
            if b is not None:
                raise ValueError(f"E_intra takes one qubit index, got {text!r}")
            return cls.E_intra(int(a))
        if b is None:
            raise ValueError(f"E_inter takes a qubit pair, got {text!r}")
        return cls.E_inter(int(a), int(b))

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class ControlPulse:
    """Rectangular pulse; ``amplitude`` is the Hamiltonian coefficient in meV."""

    electrode: Electrode
    start: float
    duration: float
    amplitude: float

    @property
    def end(self):
        return self.start + self.duration

    def shifted(self, dt):
        return replace(self, start=self.start + dt)

    def to_dict(self):
        return {
            "electrode": self.electrode.label,
            "start_ps": self.start,
            "duration_ps": self.duration,
            "amplitude_meV": self.amplitude,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            Electrode.parse(d["electrode"]),
            float(d["start_ps"]),
            float(d["duration_ps"]),
            float(d["amplitude_meV"]),
        )


@dataclass(frozen=True)
class PulseSchedule:
    pulses: tuple = ()
    total_duration: float = None

    def __post_init__(self):
        ordered = tuple(sorted(self.pulses, key=lambda p: (p.start, p.electrode, p.duration)))
        object.__setattr__(self, "pulses", ordered)
        end = max((p.end for p in ordered), default=0.0)
        if self.total_duration is None:
            object.__setattr__(self, "total_duration", float(end))

    @property
    def end(self):
        return max((p.end for p in self.pulses), default=0.0)

    def then(self, other):
        """Concatenate: ``other`` starts when this schedule's window ends."""
        shift = self.total_duration
        pulses = self.pulses + tuple(p.shifted(shift) for p in other.pulses)
        return PulseSchedule(pulses, shift + other.total_duration)

    def shifted(self, dt):
        return PulseSchedule(tuple(p.shifted(dt) for p in self.pulses), self.total_duration + dt)

    def max_qubit(self):
        return max((max(p.electrode.qubits) for p in self.pulses), default=-1)

    def to_dict(self):
        return {
            "total_duration_ps": self.total_duration,
            "pulses": [p.to_dict() for p in self.pulses],
        }

    @classmethod
    def from_dict(cls, d):
        pulses = tuple(ControlPulse.from_dict(p) for p in d.get("pulses", ()))
        total = d.get("total_duration_ps")
        return cls(pulses, None if total is None else float(total))


def sequence(*schedules):
    out = PulseSchedule()
    for s in schedules:
        out = out.then(s)
    return out


def pulse_area(pulse, params):
    """Rotation angle ``amplitude * duration / hbar`` (dimensionless)."""
    return pulse.amplitude * pulse.duration / params.hbar


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    electrode: str = ""
    interval: tuple = field(default=())


def validate_schedule(schedule, n_qubits=None):
    """Collect every problem with ``schedule``; an empty list means it is valid."""
    out = []
    for p in schedule.pulses:
        lbl = p.electrode.label
        if not (math.isfinite(p.start) and math.isfinite(p.duration) and math.isfinite(p.amplitude)):
            out.append(Violation("non_finite", f"{lbl}: non-finite pulse field", lbl, (p.start, p.end)))
            continue
        if p.duration <= 0:
            out.append(Violation("duration", f"{lbl}: duration {p.duration!r} is not positive", lbl, (p.start, p.end)))
        if p.start < 0:
            out.append(Violation("start", f"{lbl}: negative start {p.start!r}", lbl, (p.start, p.end)))
        if p.electrode.kind not in KINDS:
            out.append(Violation("electrode", f"unknown electrode kind {p.electrode.kind!r}", lbl))
        qs = p.electrode.qubits
        if any(q < 0 for q in qs) or (n_qubits is not None and any(q >= n_qubits for q in qs)):
            out.append(Violation("index", f"{lbl}: qubit index out of range for {n_qubits} qubits", lbl))
        if p.electrode.kind == "T" and p.electrode.dqd not in (0, 1):
            out.append(Violation("index", f"{lbl}: DQD index must be 0 or 1", lbl))
        if p.electrode.kind == "E_inter" and (len(qs) != 2 or qs[1] - qs[0] != 1):
            out.append(Violation("index", f"{lbl}: inter-qubit electrode needs adjacent qubits", lbl))

    by_electrode = {}
    for p in schedule.pulses:
        by_electrode.setdefault(p.electrode, []).append(p)
    for el, ps in sorted(by_electrode.items()):
        ps = sorted(ps, key=lambda p: p.start)
        for a, b in zip(ps, ps[1:]):
            if b.start < a.end:
                out.append(
                    Violation(
                        "overlap",
                        f"{el.label}: pulses overlap on [{b.start!r}, {min(a.end, b.end)!r})",
                        el.label,
                        (b.start, min(a.end, b.end)),
                    )
                )
    if schedule.total_duration < schedule.end:
        out.append(Violation("total_duration", "total_duration shorter than the last pulse"))
    return out


def jitter_amplitudes(schedule, noise_to_signal, rng):
    """Multiply every pulse amplitude by ``1 + noise_to_signal * N(0, 1)``.

    Models gate-voltage fluctuations as a per-pulse amplitude error.
    """
    if noise_to_signal == 0:
        return schedule
    xi = rng.standard_normal(len(schedule.pulses))
    pulses = tuple(
        replace(p, amplitude=p.amplitude * (1.0 + noise_to_signal * x)) for p, x in zip(schedule.pulses, xi)
    )
    return PulseSchedule(pulses, schedule.total_duration)


def as_array(schedule):
    """(start, duration, amplitude) rows, handy for quick inspection."""
    return np.array([[p.start, p.duration, p.amplitude] for p in schedule.pulses], dtype=float).reshape(-1, 3)
