"""Experiment configuration: flat ``key = value`` files with SI unit suffixes.

Example::

    # device
    device.omega01 = 5.0353 GHz
    device.alpha = -235.5 MHz
    device.T1 = 54 us
    pulse.family = DRAG
    pulse.duration = 13.33 ns
    rb.lengths = 1, 50, 100, 200
    sweep.axis = duration
    sweep.start = 6 ns
    sweep.stop = 20 ns
    sweep.points = 15

Frequencies given with Hz-type suffixes are converted to rad/s for keys that
are angular frequencies; bare numbers are always taken in internal SI units
(rad/s, s, K, rad). ``serialize`` writes bare numbers with 17 significant
digits, so ``parse(serialize(cfg)) == cfg``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .device import DeviceParams
from .pulses import FAMILIES, PulseSpec, SignalChainParams
from .serialize import fmt


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


# decimal exponents; "deg" is handled separately
_SCALE = {
    "time": {"s": 0, "ms": -3, "us": -6, "µs": -6, "ns": -9, "ps": -12},
    "freq": {"Hz": 0, "kHz": 3, "MHz": 6, "GHz": 9},
    "temp": {"K": 0, "mK": -3},
    "angle": {"rad": 0},
}


def _scaled(value: float, exponent: int) -> float:
    # dividing by an exact power of ten keeps "6 ns" == 6e-9 exactly
    return value * 10**exponent if exponent >= 0 else value / 10 ** (-exponent)


# key -> value kind; a trailing "?" allows "none"
_KINDS = {
    "device.omega01": "angfreq",
    "device.alpha": "angfreq",
    "device.T1": "time",
    "device.Tphi": "time",
    "device.temperature": "temp",
    "device.dims": "int",
    "device.drive_detuning": "angfreq",
    "device.rwa": "bool",
    "device.decoherence": "bool",
    "chain.awg_sample_period": "time",
    "chain.awg_filter_bandwidth": "freq?",
    "chain.eps_q": "float",
    "chain.eps_phi": "angle",
    "chain.lo_leakage_dbm": "float?",
    "chain.lo_reference_dbm": "float",
    "chain.external_filter_cutoff": "freq?",
    "chain.external_filter_order": "int",
    "chain.compensate_filter_delay": "bool",
    "chain.compensate_filter_phase": "bool",
    "chain.oversample": "int",
    "pulse.family": "str",
    "pulse.amplitude": "angfreq",
    "pulse.duration": "time",
    "pulse.sigma": "time?",
    "pulse.drag_beta": "time",
    "pulse.drive_phase": "angle",
    "pulse.ssb_freq": "angfreq",
    "pulse.buffer": "time",
    "pulse.vz_correction": "angle",
    "pulse.delay": "time",
    "rb.lengths": "intlist",
    "rb.n_seeds": "int",
    "rb.basis": "str",
    "rb.interleaved_gate": "str?",
    "rb.open": "bool",
    "rb.shots": "int?",
    "rb.ideal_pulses": "bool",
    "rb.ideal_slot": "time",
    "sweep.axis": "str?",
    "sweep.start": "axis",
    "sweep.stop": "axis",
    "sweep.points": "int",
    "sweep.families": "strlist",
    "calibrate.what": "str",
    "calibrate.objective": "str",
    "calibrate.n_coarse": "int",
    "decompose.gate": "str?",
    "decompose.matrix": "floatlist?",
    "output.dir": "str",
    "seed": "int",
}

SWEEP_AXES = {"ssb_freq": "angfreq", "duration": "time", "drag_beta": "time"}


@dataclass(frozen=True)
class RbSettings:
    lengths: tuple = (1, 50, 100, 200, 400, 700, 1000, 1500, 2200, 3000)
    n_seeds: int = 5
    basis: str = "XY"
    interleaved_gate: str | None = None
    open: bool = True
    shots: int | None = None
    ideal_pulses: bool = False
    ideal_slot: float = 20e-9


@dataclass(frozen=True)
class SweepSettings:
    axis: str | None = None
    start: float = 0.0
    stop: float = 0.0
    points: int = 0
    families: tuple = ()

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


@dataclass(frozen=True)
class CalibrateSettings:
    what: str = "amplitude"
    objective: str = "fidelity"
    n_coarse: int = 61


@dataclass(frozen=True)
class DecomposeSettings:
    gate: str | None = None
    matrix: tuple | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    device: DeviceParams = field(default_factory=DeviceParams)
    chain: SignalChainParams = field(default_factory=SignalChainParams)
    pulse: PulseSpec = field(default_factory=PulseSpec)
    rb: RbSettings = field(default_factory=RbSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    calibrate: CalibrateSettings = field(default_factory=CalibrateSettings)
    decompose: DecomposeSettings = field(default_factory=DecomposeSettings)
    output_dir: str = "."
    seed: int = 0


_SECTIONS = {
    "device": "device",
    "chain": "chain",
    "pulse": "pulse",
    "rb": "rb",
    "sweep": "sweep",
    "calibrate": "calibrate",
    "decompose": "decompose",
}

_NUM = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf(?:inity)?|nan)\s*([^\s\d].*)?$", re.I)


def _parse_number(text: str, kind: str, key: str) -> float:
    m = _NUM.match(text)
    if not m:
        raise ConfigError(f"{key}: cannot parse number from {text!r}")
    value = float(m.group(1))
    unit = (m.group(2) or "").strip()
    if not unit:
        return value
    if kind == "angfreq":
        if unit not in _SCALE["freq"]:
            raise ConfigError(f"{key}: unit {unit!r} is not a frequency")
        return 2 * math.pi * _scaled(value, _SCALE["freq"][unit])
    if kind == "angle" and unit == "deg":
        return math.radians(value)
    table = _SCALE.get(kind)
    if table is None or unit not in table:
        raise ConfigError(f"{key}: unit {unit!r} not valid here")
    return _scaled(value, table[unit])


def _parse_bool(text: str, key: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {text!r}")


def _parse_value(text: str, kind: str, key: str):
    optional = kind.endswith("?")
    base = kind.rstrip("?")
    if optional and text.strip().lower() in ("none", "null", ""):
        return None
    if base == "str":
        return text.strip()
    if base == "strlist":
        return tuple(s.strip() for s in text.split(",") if s.strip())
    if base == "bool":
        return _parse_bool(text, key)
    if base == "int":
        try:
            return int(text.strip(), 0)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if base == "intlist":
        try:
            return tuple(int(s) for s in text.split(",") if s.strip())
        except ValueError:
            raise ConfigError(f"{key}: expected integers, got {text!r}") from None
    if base == "floatlist":
        return tuple(_parse_number(s, "float", key) for s in text.split(",") if s.strip())
    return _parse_number(text, base, key)


def _read_pairs(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KINDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def parse_config(text: str) -> ExperimentConfig:
    """Parse configuration text; missing keys take their defaults."""
    pairs = _read_pairs(text)
    values: dict[str, object] = {}
    axis = pairs.get("sweep.axis")
    axis = None if axis is None or axis.strip().lower() in ("none", "") else axis.strip()
    if axis is not None and axis not in SWEEP_AXES:
        raise ConfigError(f"sweep.axis must be one of {sorted(SWEEP_AXES)}")
    for key, text_value in pairs.items():
        kind = _KINDS[key]
        if kind == "axis":
            if axis is None:
                raise ConfigError(f"{key} given without sweep.axis")
            kind = SWEEP_AXES[axis]
        values[key] = _parse_value(text_value, kind, key)

    cfg = ExperimentConfig()
    sections: dict[str, dict] = {s: {} for s in _SECTIONS}
    for key, v in values.items():
        if key == "seed":
            cfg = replace(cfg, seed=int(v))
        elif key == "output.dir":
            cfg = replace(cfg, output_dir=str(v))
        else:
            sec, name = key.split(".", 1)
            sections[sec][name] = v
    try:
        cfg = replace(
            cfg,
            device=replace(cfg.device, **sections["device"]),
            chain=replace(cfg.chain, **sections["chain"]),
            pulse=replace(cfg.pulse, **sections["pulse"]),
            rb=replace(cfg.rb, **sections["rb"]),
            sweep=replace(cfg.sweep, **sections["sweep"]),
            calibrate=replace(cfg.calibrate, **sections["calibrate"]),
            decompose=replace(cfg.decompose, **sections["decompose"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    validate(cfg)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def validate(cfg: ExperimentConfig) -> None:
    if cfg.pulse.family not in FAMILIES:
        raise ConfigError(f"pulse.family must be one of {FAMILIES}")
    for fam in cfg.sweep.families:
        if fam not in FAMILIES:
            raise ConfigError(f"sweep.families: unknown family {fam!r}")
    if not cfg.pulse.duration > 0 or cfg.pulse.buffer < 0:
        raise ConfigError("pulse.duration must be positive and pulse.buffer non-negative")
    if cfg.pulse.sigma is not None and not cfg.pulse.sigma > 0:
        raise ConfigError("pulse.sigma must be positive")
    if not cfg.chain.awg_sample_period > 0 or cfg.chain.oversample < 1:
        raise ConfigError("chain sample period and oversampling must be positive")
    rb = cfg.rb
    if not rb.lengths or any(m < 1 for m in rb.lengths) or any(b <= a for a, b in zip(rb.lengths, rb.lengths[1:])):
        raise ConfigError("rb.lengths must be positive and strictly increasing")
    if rb.n_seeds < 1:
        raise ConfigError("rb.n_seeds must be >= 1")
    if rb.basis not in ("XY", "HZ"):
        raise ConfigError("rb.basis must be XY or HZ")
    if rb.shots is not None and rb.shots < 1:
        raise ConfigError("rb.shots must be positive")
    if not rb.ideal_slot > 0:
        raise ConfigError("rb.ideal_slot must be positive")
    sw = cfg.sweep
    if sw.axis is not None:
        if sw.points < 1:
            raise ConfigError("sweep.points must be >= 1 (empty sweep)")
        if sw.points > 1 and sw.start == sw.stop:
            raise ConfigError("sweep range is empty")
        if sw.axis == "duration" and min(sw.start, sw.stop) <= 0:
            raise ConfigError("pulse-length sweep must stay positive")
    if cfg.calibrate.what not in ("amplitude", "beta", "vz", "all"):
        raise ConfigError("calibrate.what must be amplitude, beta, vz or all")
    if cfg.calibrate.objective not in ("fidelity", "leakage"):
        raise ConfigError("calibrate.objective must be fidelity or leakage")
    if cfg.decompose.matrix is not None and len(cfg.decompose.matrix) != 8:
        raise ConfigError("decompose.matrix needs 8 reals (re, im of a row-major 2x2)")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")


def _format(value, kind: str) -> str:
    if value is None:
        return "none"
    base = kind.rstrip("?")
    if base in ("strlist", "intlist", "floatlist"):
        return ", ".join(fmt(v) for v in value)
    if base == "bool":
        return "true" if value else "false"
    return fmt(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Every key in internal SI units (bare numbers, 17 significant digits)."""
    lines = []
    objs = {s: getattr(cfg, attr) for s, attr in _SECTIONS.items()}
    for key, kind in _KINDS.items():
        if key == "seed":
            value = cfg.seed
        elif key == "output.dir":
            value = cfg.output_dir
        else:
            sec, name = key.split(".", 1)
            if sec == "sweep" and name in ("start", "stop") and cfg.sweep.axis is None:
                continue
            value = getattr(objs[sec], name)
        lines.append(f"{key} = {_format(value, kind)}")
    return "\n".join(lines) + "\n"
