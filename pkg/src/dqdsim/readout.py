"""Resonant-tunneling readout, initialization and chain loading.

A biased DQD is a two-level system in the dot basis {L, R} with Hamiltonian
``[[bias, t_c], [t_c, -bias]]``; the pseudo-spin states are
``|+> = (|L> + |R>)/sqrt(2)`` and ``|-> = (|L> - |R>)/sqrt(2)``.

Convention: with ``bias > 0`` and ``t_c > 0`` the Bloch vector precesses about
``(t_c, 0, bias)``, so |+> (Bloch +x) reaches +z = L first and |-> reaches R.
At ``bias = t_c`` the localization is complete after half a period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import su2_propagator

PLUS = np.array([1.0, 1.0], complex) / math.sqrt(2.0)
MINUS = np.array([1.0, -1.0], complex) / math.sqrt(2.0)
DOT_L = np.array([1.0, 0.0], complex)
DOT_R = np.array([0.0, 1.0], complex)


class InconclusiveReadout(RuntimeError):
    def __init__(self, max_localization, threshold):
        self.max_localization = max_localization
        self.threshold = threshold
        super().__init__(
            f"readout inconclusive: peak dot population {max_localization:.6f} never exceeds 0.5 + {threshold:g}"
        )


@dataclass(frozen=True)
class ReadoutConfig:
    """Readout pulse: gap ``delta_eps``, bias and tunneling in meV, switch-off in ps or ``"auto"``.

    ``bias`` and ``t_c`` default to ``delta_eps / 2``, the resonant setting.
    """

    delta_eps: float = 1.0
    bias: float = None
    t_c: float = None
    switch_off_time: object = "auto"
    threshold: float = 0.25

    def __post_init__(self):
        if not (math.isfinite(self.delta_eps) and self.delta_eps > 0):
            raise ValueError("delta_eps must be > 0")
        if self.bias is None:
            object.__setattr__(self, "bias", 0.5 * self.delta_eps)
        if self.t_c is None:
            object.__setattr__(self, "t_c", 0.5 * self.delta_eps)
        if not math.isfinite(self.bias):
            raise ValueError("bias must be finite")
        if not (math.isfinite(self.t_c) and self.t_c >= 0):
            raise ValueError("t_c must be >= 0")
        sw = self.switch_off_time
        if sw != "auto" and not (isinstance(sw, (int, float)) and math.isfinite(sw) and sw >= 0):
            raise ValueError("switch_off_time must be 'auto' or a time >= 0 in ps")
        if not 0 <= self.threshold < 0.5:
            raise ValueError("threshold must lie in [0, 0.5)")

    def omega(self, params):
        """Oscillation angular frequency (1/ps)."""
        return 2.0 * math.hypot(self.bias, self.t_c) / params.hbar

    def period(self, params):
        w = self.omega(params)
        return math.inf if w == 0 else 2.0 * math.pi / w


def initial_state(initial):
    """Dot-basis amplitudes for ``"plus"``, ``"minus"``, ``"L"``, ``"R"`` or ``(a, b)`` = a|+> + b|->."""
    if isinstance(initial, str):
        table = {"plus": PLUS, "minus": MINUS, "L": DOT_L, "R": DOT_R}
        if initial not in table:
            raise ValueError(f"unknown initial state {initial!r}")
        return table[initial].copy()
    vec = np.asarray(initial, dtype=complex)
    if vec.shape != (2,):
        raise ValueError("superposition needs two amplitudes (a, b)")
    nrm = np.linalg.norm(vec)
    if not abs(nrm - 1.0) < 1e-12:
        raise ValueError("superposition must be normalized")
    return vec[0] * PLUS + vec[1] * MINUS


def dot_propagator(bias, t_c, dt, params):
    return su2_propagator(t_c, bias, dt, params.hbar)


def readout_dynamics(initial, cfg, params, times):
    """``(P_L, P_R)`` arrays at ``times`` (ps) under the readout Hamiltonian."""
    psi = initial_state(initial)
    times = np.asarray(times, dtype=float)
    out = np.array([dot_propagator(cfg.bias, cfg.t_c, t, params) @ psi for t in times]).reshape(-1, 2)
    pl = np.abs(out[:, 0]) ** 2
    return pl, 1.0 - pl


def _bloch(psi):
    a, b = psi
    return np.array([2 * (a.conjugate() * b).real, 2 * (a.conjugate() * b).imag, abs(a) ** 2 - abs(b) ** 2])


def _z_harmonics(psi, cfg):
    """``z(phi) = c + amp cos(phi - phi0)`` with ``phi = omega t``."""
    r0 = _bloch(psi)
    mag = math.hypot(cfg.bias, cfg.t_c)
    if mag == 0:
        return r0[2], 0.0, 0.0
    n = np.array([cfg.t_c, 0.0, cfg.bias]) / mag
    proj = n @ r0
    c = n[2] * proj
    a = r0[2] - c
    b = np.cross(n, r0)[2]
    return c, math.hypot(a, b), math.atan2(b, a) % (2 * math.pi)


def first_visited_dot(initial, cfg, params):
    """Dot whose population peaks first (above 1/2), and the time of that peak.

    Returns ``(None, 0.0)`` when neither dot is ever favored.
    """
    c, amp, phi0 = _z_harmonics(initial_state(initial), cfg)
    if amp < 1e-12:
        if abs(c) < 1e-12:
            return None, 0.0
        return ("L" if c > 0 else "R"), 0.0
    cands = [(phi0, "L", c + amp > 1e-12), ((phi0 + math.pi) % (2 * math.pi), "R", c - amp < -1e-12)]
    phi, dot, _ = min(x for x in cands if x[2])
    return dot, phi / cfg.omega(params)


def auto_switch_off(initial, cfg, params):
    """First time in one period where ``|P_L - P_R|`` is maximal, and ``P_L`` there."""
    psi = initial_state(initial)
    c, amp, phi0 = _z_harmonics(psi, cfg)
    if amp < 1e-12:
        return 0.0, float(0.5 * (1.0 + c))
    cands = [(abs(c + amp), phi0, c + amp), (abs(c - amp), (phi0 + math.pi) % (2 * math.pi), c - amp)]
    best = max(v for v, _, _ in cands)
    phi, z = min(((p, z) for v, p, z in cands if v >= best - 1e-12), key=lambda x: x[0])
    return phi / cfg.omega(params), float(0.5 * (1.0 + z))


@dataclass(frozen=True)
class Measurement:
    dot: str
    confidence: float
    switch_off_used: float

    def to_dict(self):
        return {"dot": self.dot, "confidence": self.confidence, "switch_off_ps": self.switch_off_used}


def simulate_measurement(initial, cfg, params, rng_seed):
    """Switch off tunneling at maximal localization, then sample the occupied dot.

    ``rng_seed`` may be an int or a ``numpy.random.Generator``.
    """
    if cfg.switch_off_time == "auto":
        t, pl = auto_switch_off(initial, cfg, params)
    else:
        t = float(cfg.switch_off_time)
        pl = float(readout_dynamics(initial, cfg, params, [t])[0][0])
    peak = max(pl, 1.0 - pl)
    if peak < 0.5 + cfg.threshold:
        raise InconclusiveReadout(peak, cfg.threshold)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    dot = "L" if rng.random() < pl else "R"
    return Measurement(dot, float(pl if dot == "L" else 1.0 - pl), float(t))


# ---------------------------------------------------------------------------
# initialization


def thermal_initialize(delta_eps, kT):
    """Boltzmann occupations ``(p_plus, p_minus)`` of a DQD with gap ``delta_eps``."""
    if not delta_eps > 0:
        raise ValueError("delta_eps must be > 0")
    if kT < 0:
        raise ValueError("kT must be >= 0")
    if kT == 0:
        return 1.0, 0.0
    x = math.exp(-delta_eps / kT)
    p_minus = x / (1.0 + x)
    return 1.0 - p_minus, p_minus


@dataclass(frozen=True)
class DqdStep:
    """One piece of a single-DQD initialization sequence.

    ``load`` places the electron in ``dot``; ``pulse`` evolves under
    ``(bias, t_c)`` for ``duration`` ps.
    """

    kind: str
    duration: float = 0.0
    bias: float = 0.0
    t_c: float = 0.0
    dot: str = None


def fast_initialize(target, cfg, params):
    """Reversed readout: localize in L, run the resonant half period, invert for |->.

    A resonant half period is a pi rotation about ``(t_c, 0, bias)``; it is its
    own inverse up to phase, so it carries L back to |+>. The inversion is a
    bias-only pulse of area pi/2 (``-i sigma_z``), taking |+> to |->.
    """
    if target not in ("plus", "minus"):
        raise ValueError("target must be 'plus' or 'minus'")
    half = 0.5 * cfg.period(params)
    steps = [DqdStep("load", dot="L"), DqdStep("pulse", half, cfg.bias, cfg.t_c)]
    if target == "minus":
        steps.append(DqdStep("pulse", 0.5 * math.pi * params.hbar / cfg.delta_eps, cfg.delta_eps, 0.0))
    return steps


def apply_steps(steps, params, psi=None):
    """Dot-basis state after running ``steps``."""
    psi = DOT_L.copy() if psi is None else np.asarray(psi, complex)
    for st in steps:
        if st.kind == "load":
            psi = initial_state(st.dot)
        elif st.kind == "pulse":
            psi = dot_propagator(st.bias, st.t_c, st.duration, params) @ psi
        else:
            raise ValueError(f"unknown step kind {st.kind!r}")
    return psi


def state_fidelity(psi, target):
    return float(abs(np.vdot(initial_state(target), psi)) ** 2)


# ---------------------------------------------------------------------------
# chain loading


@dataclass(frozen=True)
class PlanEvent:
    """``load`` into slot 0, ``form``/``invert`` in place, or ``shuttle`` from ``slot`` to ``slot + 1``."""

    kind: str
    electron: int
    slot: int

    def to_dict(self):
        return {"kind": self.kind, "electron": self.electron, "slot": self.slot}


def slot_of(qubit, dqd):
    return 2 * qubit + dqd


def plan_chain_load(n_qubits, levels=None):
    """Fill the 2n DQDs of a chain from the turnstile end, farthest first.

    Electron ``k`` is loaded into slot 0, relaxed to |+>, inverted when its
    target DQD should hold |->, then shuttled to slot ``2n - 1 - k``.
    ``levels`` gives each qubit's target level (default all C0, ``|+->``).
    """
    from .core import Level

    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    levels = [Level.C0] * n_qubits if levels is None else [Level(l) for l in levels]
    if len(levels) != n_qubits:
        raise ValueError("need one target level per qubit")
    n_slots = 2 * n_qubits
    plan = []
    for k in range(n_slots):
        dest = n_slots - 1 - k
        plan.append(PlanEvent("load", k, 0))
        plan.append(PlanEvent("form", k, 0))
        if levels[dest // 2].dqd_signs[dest % 2] < 0:
            plan.append(PlanEvent("invert", k, 0))
        plan.extend(PlanEvent("shuttle", k, s) for s in range(dest))
    validate_plan(plan, n_qubits)
    return plan


class PlanCollision(RuntimeError):
    pass


def replay_plan(plan, n_qubits):
    """Token simulation: slot -> electron (or -1). Raises PlanCollision on any conflict."""
    slots = [-1] * (2 * n_qubits)
    for ev in plan:
        if ev.kind == "load":
            if slots[0] != -1:
                raise PlanCollision(f"load of electron {ev.electron} into occupied slot 0")
            slots[0] = ev.electron
        elif ev.kind in ("form", "invert"):
            if slots[ev.slot] != ev.electron:
                raise PlanCollision(f"{ev.kind} on slot {ev.slot} not holding electron {ev.electron}")
        elif ev.kind == "shuttle":
            s = ev.slot
            if not 0 <= s < len(slots) - 1 or slots[s] != ev.electron:
                raise PlanCollision(f"shuttle of electron {ev.electron} from slot {s} it does not hold")
            if slots[s + 1] != -1:
                raise PlanCollision(f"shuttle into occupied slot {s + 1}")
            slots[s], slots[s + 1] = -1, ev.electron
        else:
            raise ValueError(f"unknown plan event {ev.kind!r}")
    return slots


def validate_plan(plan, n_qubits):
    slots = replay_plan(plan, n_qubits)
    if -1 in slots:
        raise PlanCollision(f"plan leaves slots empty: {slots}")
    return slots
