"""Run configuration: YAML file, environment overrides, validation.

Every field has a default, so an empty file is a valid config. Overrides come
from environment variables ``DQDSIM_<SECTION>__<FIELD>`` (values parsed as
YAML scalars), e.g. ``DQDSIM_DEVICE__KAPPA=13.1``. Unknown keys and bad values
raise :class:`ConfigError` naming ``section.field``.
"""
from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field, fields

import yaml

from .core import LEVEL_NAMES, DeviceParams
from .decoherence import ChannelSet, PhononChannel
from .gates import GateAmplitudes, GateSpec
from .microscopic import DotGeometry
from .readout import ReadoutConfig

ENV_PREFIX = "DQDSIM_"


class ConfigError(ValueError):
    pass


@dataclass
class DeviceSection:
    hbar: float = DeviceParams.hbar
    A_idle: float = 0.0
    P_idle: float = 0.0
    temperature_kT: float = DeviceParams.temperature_kT
    material: str = DeviceParams.material
    coulomb_constant_k: float = DeviceParams.coulomb_constant_k
    kappa: float = DeviceParams.kappa


@dataclass
class GeometrySection:
    intra_nm: float = 22.0
    inter_nm: float = 44.0
    decay_a_nm: float = 10.0
    positions_nm: list = None  # optional explicit (4, 3) dot positions: 1a, 1b, 2a, 2b


@dataclass
class AmplitudesSection:
    A_max: float = 1.0
    P_max: float = 1.0
    J_max: float = 1.0


@dataclass
class ChannelsSection:
    eps_meV: float = 1.0  # DQD |+>/|-> gap used for the flip rates
    eps_ref_meV: float = 1.0
    piezoelectric_tau_ref_s: float = 1e-2  # null disables the channel
    deformation_tau_ref_s: float = 1e6
    two_phonon_rate_per_s: float = 0.0
    rate_scale: float = 1.0  # multiplies every flip rate in run (for accelerated-noise studies)
    noise_to_signal: float = 0.0


@dataclass
class ProgramSection:
    n_qubits: int = 2
    initial: list = field(default_factory=lambda: ["C1", "C0"])
    gates: list = field(default_factory=lambda: [{"gate": "Xor", "qubits": [0, 1]}])
    idle_ps: float = 0.0
    method: str = "unitary"  # unitary | lindblad | trajectories
    dt_ps: float = 0.01
    sample_ps: float = 0.1
    n_traj: int = 1000


@dataclass
class ReadoutSection:
    delta_eps: float = 1.0
    bias: float = None
    t_c: float = None
    switch_off_time: object = "auto"
    threshold: float = 0.25
    initial: str = "plus"  # plus | minus | thermal
    n_shots: int = 1000


@dataclass
class RatesSection:
    eps_grid_meV: list = field(default_factory=lambda: [0.125, 0.25, 0.5, 1.0, 2.0, 4.0])


@dataclass
class ExchangeSection:
    n_samples: int = 2**20
    replicates: int = 32
    n_sigma: float = 3.0
    rel_tol: float = None
    asymmetry_dot: int = None  # displace this dot to break the mirror symmetry
    asymmetry_shift_nm: list = None


@dataclass
class RunConfig:
    seed: int = 0
    device: DeviceSection = field(default_factory=DeviceSection)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    amplitudes: AmplitudesSection = field(default_factory=AmplitudesSection)
    channels: ChannelsSection = field(default_factory=ChannelsSection)
    program: ProgramSection = field(default_factory=ProgramSection)
    readout: ReadoutSection = field(default_factory=ReadoutSection)
    rates: RatesSection = field(default_factory=RatesSection)
    exchange: ExchangeSection = field(default_factory=ExchangeSection)

    # --- typed views -------------------------------------------------------

    def device_params(self):
        return DeviceParams(**dataclasses.asdict(self.device))

    def geometry_obj(self):
        g = self.geometry
        if g.positions_nm is not None:
            geom = DotGeometry(g.positions_nm, g.decay_a_nm)
        else:
            geom = DotGeometry.rectangle(g.intra_nm, g.inter_nm, g.decay_a_nm)
        ex = self.exchange
        if ex.asymmetry_dot is not None:
            geom = geom.displaced(ex.asymmetry_dot, ex.asymmetry_shift_nm or [0.0, 0.0, 0.0])
        return geom

    def gate_amplitudes(self):
        return GateAmplitudes(**dataclasses.asdict(self.amplitudes))

    def channel_set(self):
        c = self.channels
        chans = []
        if c.deformation_tau_ref_s is not None:
            chans.append(PhononChannel("deformation", c.deformation_tau_ref_s, c.eps_ref_meV))
        if c.piezoelectric_tau_ref_s is not None and self.device.material != "deformation_only":
            chans.append(PhononChannel("piezoelectric", c.piezoelectric_tau_ref_s, c.eps_ref_meV))
        if c.two_phonon_rate_per_s:
            chans.append(PhononChannel.two_phonon(c.two_phonon_rate_per_s, self.device.temperature_kT))
        return ChannelSet(tuple(chans), self.device.material)

    def gate_program(self):
        return [GateSpec.from_dict(g) for g in self.program.gates]

    def readout_config(self):
        r = self.readout
        return ReadoutConfig(r.delta_eps, r.bias, r.t_c, r.switch_off_time, r.threshold)

    def to_dict(self):
        return dataclasses.asdict(self)

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)


_SECTIONS = {f.name: f for f in fields(RunConfig)}


def _coerce(path, value, default, ftype):
    """Check a scalar/list value against the field's declared type."""
    if value is None:
        return None
    if ftype in ("float", float) or isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"{path}: must be finite")
        return value
    if ftype in ("int", int) or isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if ftype in ("str", str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    if ftype in ("list", list):
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return value
    return value


def _build_section(name, cls, data):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{name}.{unknown[0]}: unknown field (known: {', '.join(known)})")
    obj = cls()
    for key, value in data.items():
        f = known[key]
        setattr(obj, key, _coerce(f"{name}.{key}", value, getattr(obj, key), f.type))
    return obj


def from_dict(data):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown section (known: {', '.join(_SECTIONS)})")
    cfg = RunConfig()
    for name, value in data.items():
        if name == "seed":
            cfg.seed = _coerce("seed", value, 0, "int")
            continue
        cls = type(getattr(cfg, name))
        setattr(cfg, name, _build_section(name, cls, value))
    validate(cfg)
    return cfg


def _check(path, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError, IndexError) as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith(path + ".") else f"{path}: {msg}") from None


def validate(cfg):
    """Build every typed view once so bad values fail at load time with their section name."""
    if cfg.seed is None or cfg.seed < 0:
        raise ConfigError("seed: must be a non-negative integer")
    _check("device", cfg.device_params)
    _check("geometry", cfg.geometry_obj)
    _check("amplitudes", cfg.gate_amplitudes)
    _check("channels", cfg.channel_set)
    c = cfg.channels
    for key in ("eps_meV", "eps_ref_meV"):
        if not getattr(c, key) > 0:
            raise ConfigError(f"channels.{key}: must be > 0")
    if c.rate_scale is None or c.rate_scale < 0:
        raise ConfigError("channels.rate_scale: must be >= 0")
    if c.noise_to_signal is None or c.noise_to_signal < 0:
        raise ConfigError("channels.noise_to_signal: must be >= 0")
    p = cfg.program
    gates = _check("program.gates", cfg.gate_program)
    if p.n_qubits is None or p.n_qubits < 1:
        raise ConfigError("program.n_qubits: must be >= 1")
    if len(p.initial) != p.n_qubits:
        raise ConfigError(f"program.initial: needs {p.n_qubits} levels, got {len(p.initial)}")
    bad = [l for l in p.initial if l not in LEVEL_NAMES]
    if bad:
        raise ConfigError(f"program.initial: unknown level {bad[0]!r} (use {', '.join(LEVEL_NAMES)})")
    for g in gates:
        if max(g.qubits) >= p.n_qubits:
            raise ConfigError(f"program.gates: {g} addresses a qubit outside 0..{p.n_qubits - 1}")
    if p.method not in ("unitary", "lindblad", "trajectories"):
        raise ConfigError("program.method: choose unitary, lindblad or trajectories")
    for key in ("dt_ps", "sample_ps"):
        if not (getattr(p, key) or 0) > 0:
            raise ConfigError(f"program.{key}: must be > 0")
    if p.idle_ps is None or p.idle_ps < 0:
        raise ConfigError("program.idle_ps: must be >= 0")
    if p.n_traj is None or p.n_traj < 1:
        raise ConfigError("program.n_traj: must be >= 1")
    _check("readout", cfg.readout_config)
    if cfg.readout.initial not in ("plus", "minus", "thermal"):
        raise ConfigError("readout.initial: choose plus, minus or thermal")
    if cfg.readout.n_shots is None or cfg.readout.n_shots < 1:
        raise ConfigError("readout.n_shots: must be >= 1")
    grid = cfg.rates.eps_grid_meV
    if not grid or any(isinstance(e, bool) or not isinstance(e, (int, float)) or not e > 0 for e in grid):
        raise ConfigError("rates.eps_grid_meV: needs positive numbers")
    ex = cfg.exchange
    if ex.replicates is None or ex.replicates < 2:
        raise ConfigError("exchange.replicates: must be >= 2")
    if ex.n_samples is None or ex.n_samples < 1:
        raise ConfigError("exchange.n_samples: must be >= 1")
    return cfg


def env_overrides(environ=None):
    """Nested dict built from ``DQDSIM_SECTION__FIELD`` variables (``DQDSIM_SEED`` for the seed)."""
    environ = os.environ if environ is None else environ
    out = {}
    lowered = {n.lower(): n for n in _SECTIONS}
    for key, raw in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX) or key == "DQDSIM_NUMBA":
            continue
        parts = key[len(ENV_PREFIX):].split("__")
        section = lowered.get(parts[0].lower())
        if section is None:
            raise ConfigError(f"{key}: unknown section {parts[0].lower()!r}")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{key}: cannot parse value: {exc}") from None
        if section == "seed":
            out["seed"] = value
            continue
        if len(parts) != 2:
            raise ConfigError(f"{key}: expected {ENV_PREFIX}<SECTION>__<FIELD>")
        cls = _SECTIONS[section].default_factory
        names = {f.name.lower(): f.name for f in fields(cls)}
        name = names.get(parts[1].lower())
        if name is None:
            raise ConfigError(f"{key}: unknown field {section}.{parts[1].lower()}")
        out.setdefault(section, {})[name] = value
    return out


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        prev = out.get(k)
        out[k] = _merge(prev if isinstance(prev, dict) else {}, v) if isinstance(v, dict) else v
    return out


def load(path=None, environ=None, seed=None):
    """Parse the YAML file (if any), apply environment overrides and ``seed``, validate."""
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"{path}: YAML syntax error{where}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    data = _merge(data, env_overrides(environ))
    if seed is not None:
        data["seed"] = seed
    return from_dict(data)
