"""Experiment configuration: a strict JSON schema with one section per module.

Every section is a frozen dataclass. ``ExperimentConfig.from_dict`` rejects
unknown keys (naming the dotted path of the offending key) and
``to_dict`` produces plain JSON types, so ``from_dict(to_dict(cfg)) == cfg``.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional, Union

from .disturbances import DisturbanceSpec
from .shapes import SHAPES

AUTO = "auto"


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


def _tuple(x):
    if x is None:
        return None
    return tuple(_tuple(v) if isinstance(v, (list, tuple)) else v for v in x)


def _listify(x):
    if isinstance(x, tuple):
        return [_listify(v) for v in x]
    if dataclasses.is_dataclass(x):
        return _section_to_dict(x)
    return x


def _section_to_dict(sec) -> dict:
    out = {}
    for f in dataclasses.fields(sec):
        v = getattr(sec, f.name)
        if isinstance(v, DisturbanceSpec):
            out[f.name] = v.to_dict()
        elif isinstance(v, tuple) and v and isinstance(v[0], DisturbanceSpec):
            out[f.name] = [s.to_dict() for s in v]
        else:
            out[f.name] = _listify(v)
    return out


def _check_keys(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            where = f"{path}.{key}" if path else key
            raise ConfigError(f"unknown config key '{where}'")


def _simple(cls, data, path):
    """Build a flat section; list values become tuples."""
    if data is None:
        return cls()
    _check_keys(cls, data, path)
    kwargs = {k: _tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _number(name, value, positive=False, allow_none=False):
    if value is None and allow_none:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{name} must be a number, got {value!r}")
    if positive and not value > 0:
        raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ShapeSection:
    source: str = "synthetic"  # "synthetic" or "dir"
    name: str = "sine"
    demo_dir: Optional[str] = None
    amplitude: float = 1.0
    frequency: float = 1.0
    noise: float = 0.02
    decay: float = 10.0

    def __post_init__(self):
        if self.source not in ("synthetic", "dir"):
            raise ValueError("source must be 'synthetic' or 'dir'")
        if self.source == "synthetic" and self.name not in SHAPES:
            raise ValueError(f"unknown shape {self.name!r}; choose from {SHAPES}")
        if self.source == "dir" and not self.demo_dir:
            raise ValueError("demo_dir is required when source is 'dir'")


@dataclass(frozen=True)
class PreprocessSection:
    n: int = 1000
    demo_count: Optional[int] = 4

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        if self.demo_count is not None and (not isinstance(self.demo_count, int)
                                            or self.demo_count < 1):
            raise ValueError("demo_count must be a positive integer or null")


@dataclass(frozen=True)
class ModelSection:
    num_centers: int = 40
    bandwidth: float = 0.3
    ridge: float = 1e-6
    path: Optional[str] = None  # load a fitted model instead of fitting inline

    def __post_init__(self):
        if not isinstance(self.num_centers, int) or self.num_centers < 1:
            raise ValueError("num_centers must be a positive integer")
        _number("bandwidth", self.bandwidth, positive=True)
        _number("ridge", self.ridge)
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")


@dataclass(frozen=True)
class ClfSection:
    enabled: bool = True
    c: float = 50.0
    p_diag: Optional[tuple] = None

    def __post_init__(self):
        _number("c", self.c, positive=True)


@dataclass(frozen=True)
class L1Section:
    enabled: bool = True
    omega: float = 30.0
    t_sample: Optional[float] = None  # None: one simulation step
    a_s_diag: tuple = (-10.0, -10.0)

    def __post_init__(self):
        _number("omega", self.omega, positive=True)
        _number("t_sample", self.t_sample, positive=True, allow_none=True)


@dataclass(frozen=True)
class SelectorSection:
    mode: str = "dtw"
    window_w: int = 50
    history_h: int = 40
    target_history: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("dtw", "time_indexed"):
            raise ValueError("mode must be 'dtw' or 'time_indexed'")


@dataclass(frozen=True)
class DtwSection:
    band: Optional[int] = None


_CERT_FIELDS = ("delta_sigma", "l_sigma_z", "delta_f", "delta_nom", "delta_sigma_hat",
                "delta_b", "v0")


@dataclass(frozen=True)
class CertificateSection:
    """Certificate inputs; ``"auto"`` entries are estimated from simulation."""

    delta_sigma: Union[float, str] = AUTO
    l_sigma_z: Union[float, str] = AUTO
    delta_f: Union[float, str] = AUTO
    delta_nom: Union[float, str] = AUTO
    delta_sigma_hat: Union[float, str] = AUTO
    delta_b: Union[float, str] = AUTO
    v0: Union[float, str] = AUTO
    epsilon: float = 0.5
    t1_minus_t0: float = 0.3
    safety: float = 1.2

    def __post_init__(self):
        for name in _CERT_FIELDS:
            v = getattr(self, name)
            if v != AUTO:
                _number(name, v)
        _number("epsilon", self.epsilon, positive=True)
        _number("t1_minus_t0", self.t1_minus_t0)
        _number("safety", self.safety, positive=True)


@dataclass(frozen=True)
class PidSection:
    kp: float = 1600.0
    ki: float = 400.0
    kd: float = 80.0
    windup: Optional[float] = None


@dataclass(frozen=True)
class RegimeSection:
    kind: str = "perfect"
    disturbances: tuple = ()
    pid: PidSection = field(default_factory=PidSection)
    hold: Optional[tuple] = None
    state_gain: Optional[tuple] = None
    z0_offset: Optional[tuple] = None
    name: str = "custom"

    def __post_init__(self):
        if self.kind not in ("perfect", "imperfect"):
            raise ValueError("regime kind must be 'perfect' or 'imperfect'")
        for spec in self.disturbances:
            if self.kind == "perfect" and spec.channel != "task":
                raise ValueError(
                    f"the perfect regime takes task-channel disturbances, got {spec.channel!r}")
            if self.kind == "imperfect" and spec.channel == "task":
                raise ValueError("task-channel (sigma) disturbances belong to the perfect regime")
        if self.hold is not None:
            a, b = self.hold
            if not 0.0 <= a < b <= 1.0:
                raise ValueError("hold must satisfy 0 <= start < stop <= 1")

    @classmethod
    def from_dict(cls, data, path="regime") -> "RegimeSection":
        if data is None:
            return cls()
        _check_keys(cls, data, path)
        kw = dict(data)
        try:
            if "disturbances" in kw:
                specs = []
                for i, d in enumerate(kw["disturbances"]):
                    try:
                        specs.append(DisturbanceSpec.from_dict(d))
                    except KeyError as exc:
                        raise ConfigError(f"{path}.disturbances[{i}]: {exc.args[0]}") from None
                kw["disturbances"] = tuple(specs)
            if "pid" in kw:
                kw["pid"] = _simple(PidSection, kw["pid"], f"{path}.pid")
            for key in ("hold", "state_gain", "z0_offset"):
                if kw.get(key) is not None:
                    kw[key] = _tuple(kw[key])
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{path}: {exc}") from None


def table_rows() -> tuple:
    """The five disturbance rows of the benchmark table (synthetic-scale amplitudes)."""
    pulses = ((0.2, 0.3), (0.55, 0.65))
    return (
        RegimeSection("perfect", (DisturbanceSpec("pulse_train", "task", (3.0, -3.0),
                                                  windows=pulses),), name="perfect_step"),
        RegimeSection("imperfect", (DisturbanceSpec("multi_sine", "matched", (40.0, -40.0)),),
                      name="matched_multisine"),
        RegimeSection("imperfect", (DisturbanceSpec("constant", "unmatched", (0.5, -0.5)),),
                      name="unmatched_constant"),
        RegimeSection("imperfect", (DisturbanceSpec("multi_sine", "unmatched", (1.0, -1.0)),),
                      name="unmatched_multisine"),
        RegimeSection("imperfect", (DisturbanceSpec("multi_sine", "matched", (40.0, -40.0)),
                                    DisturbanceSpec("pulse_train", "unmatched", (1.0, -1.0),
                                                    windows=pulses)),
                      name="matched_multisine_unmatched_pulses"),
    )


CONTROLLERS = ("nominal", "clf", "l1")


@dataclass(frozen=True)
class BatchSection:
    shapes: tuple = SHAPES
    rows: tuple = field(default_factory=table_rows)
    controllers: tuple = CONTROLLERS

    def __post_init__(self):
        for c in self.controllers:
            if c not in CONTROLLERS:
                raise ValueError(f"unknown controller {c!r}; choose from {CONTROLLERS}")
        if "nominal" not in self.controllers:
            raise ValueError("controllers must include 'nominal' (the normalization baseline)")
        for s in self.shapes:
            if s not in SHAPES:
                raise ValueError(f"unknown shape {s!r}")
        names = [r.name for r in self.rows]
        if len(set(names)) != len(names):
            raise ValueError("batch row names must be unique")

    @classmethod
    def from_dict(cls, data, path="batch") -> "BatchSection":
        _check_keys(cls, data, path)
        kw = dict(data)
        try:
            if "rows" in kw:
                kw["rows"] = tuple(RegimeSection.from_dict(r, f"{path}.rows[{i}]")
                                   for i, r in enumerate(kw["rows"]))
            for key in ("shapes", "controllers"):
                if key in kw:
                    kw[key] = tuple(kw[key])
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"
    svg: bool = True


_SIMPLE_SECTIONS = {
    "shape": ShapeSection, "preprocessing": PreprocessSection, "model": ModelSection,
    "clf": ClfSection, "l1": L1Section, "selector": SelectorSection, "dtw": DtwSection,
    "certificate": CertificateSection, "output": OutputSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    shape: ShapeSection = field(default_factory=ShapeSection)
    preprocessing: PreprocessSection = field(default_factory=PreprocessSection)
    model: ModelSection = field(default_factory=ModelSection)
    clf: ClfSection = field(default_factory=ClfSection)
    l1: L1Section = field(default_factory=L1Section)
    selector: SelectorSection = field(default_factory=SelectorSection)
    dtw: DtwSection = field(default_factory=DtwSection)
    certificate: CertificateSection = field(default_factory=CertificateSection)
    regime: RegimeSection = field(default_factory=RegimeSection)
    batch: Optional[BatchSection] = None
    output: OutputSection = field(default_factory=OutputSection)
    seeds: tuple = (0,)

    def __post_init__(self):
        if not self.seeds or any(isinstance(s, bool) or not isinstance(s, int)
                                 for s in self.seeds):
            raise ConfigError("seeds must be a non-empty list of integers")

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if v is None:
                out[f.name] = None
            elif f.name == "regime":
                out[f.name] = _section_to_dict(v)
            elif f.name == "batch":
                out[f.name] = {"shapes": list(v.shapes),
                               "rows": [_section_to_dict(r) for r in v.rows],
                               "controllers": list(v.controllers)}
            elif f.name == "seeds":
                out[f.name] = list(v)
            else:
                out[f.name] = _section_to_dict(v)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        _check_keys(cls, data, "")
        kw = {}
        for key, value in data.items():
            if key in _SIMPLE_SECTIONS:
                kw[key] = _simple(_SIMPLE_SECTIONS[key], value, key)
            elif key == "regime":
                kw[key] = RegimeSection.from_dict(value)
            elif key == "batch":
                kw[key] = None if value is None else BatchSection.from_dict(value)
            elif key == "seeds":
                if not isinstance(value, list):
                    raise ConfigError("seeds must be a list of integers")
                kw[key] = tuple(value)
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json() + "\n")

    def with_seeds(self, seeds) -> "ExperimentConfig":
        return dataclasses.replace(self, seeds=tuple(int(s) for s in seeds))
