"""Scripted disturbance signals on the normalized time axis ``t in [0, 1]``."""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

KINDS = ("constant", "step", "pulse_train", "multi_sine")
CHANNELS = ("task", "matched", "unmatched")


@dataclass(frozen=True)
class DisturbanceSpec:
    """One disturbance signal routed to a channel.

    ``amplitude`` is per axis. ``windows`` lists ``(start, stop)`` pairs for
    ``pulse_train`` (right-open). ``step`` switches on at ``start``.
    ``multi_sine`` sums ``amplitude * weights[j] * sin(2 pi freqs[j] t + phases[j])``
    per axis.
    """

    kind: str
    channel: str = "task"
    amplitude: tuple = (0.0, 0.0)
    start: float = 0.0
    windows: tuple = ()
    freqs: tuple = (3.0, 7.0)
    weights: tuple = (0.8, 0.4)
    phases: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}; expected one of {KINDS}")
        if self.channel not in CHANNELS:
            raise ValueError(f"unknown channel {self.channel!r}; expected one of {CHANNELS}")
        object.__setattr__(self, "amplitude", tuple(float(a) for a in self.amplitude))
        object.__setattr__(self, "windows",
                           tuple((float(a), float(b)) for a, b in self.windows))
        for a, b in self.windows:
            if not 0.0 <= a < b <= 1.0:
                raise ValueError(f"pulse window ({a}, {b}) must satisfy 0 <= start < stop <= 1")
        object.__setattr__(self, "freqs", tuple(float(f) for f in self.freqs))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.freqs) != len(self.weights):
            raise ValueError("multi_sine needs one weight per frequency")
        phases = self.phases
        if not phases:
            phases = tuple((0.0,) * len(self.freqs) for _ in self.amplitude)
        phases = tuple(tuple(float(p) for p in row) for row in phases)
        if len(phases) != len(self.amplitude) or any(len(r) != len(self.freqs) for r in phases):
            raise ValueError("phases must be one row per axis, one entry per frequency")
        object.__setattr__(self, "phases", phases)

    @property
    def dim(self) -> int:
        return len(self.amplitude)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "channel": self.channel, "amplitude": list(self.amplitude),
            "start": self.start, "windows": [list(w) for w in self.windows],
            "freqs": list(self.freqs), "weights": list(self.weights),
            "phases": [list(r) for r in self.phases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DisturbanceSpec":
        allowed = {"kind", "channel", "amplitude", "start", "windows", "freqs", "weights",
                   "phases"}
        unknown = set(data) - allowed
        if unknown:
            raise KeyError(f"unknown disturbance key(s): {sorted(unknown)}")
        data = dict(data)
        for key in ("amplitude", "freqs", "weights"):
            if key in data:
                data[key] = tuple(data[key])
        if "windows" in data:
            data["windows"] = tuple(tuple(w) for w in data["windows"])
        if "phases" in data:
            data["phases"] = tuple(tuple(r) for r in data["phases"])
        return cls(**data)


def eval_disturbance(spec: DisturbanceSpec, t: float) -> np.ndarray:
    return sample_disturbance(spec, np.array([float(t)]))[0]


def sample_disturbance(spec: DisturbanceSpec, times) -> np.ndarray:
    """Signal values at each of ``times``, shape ``(len(times), dim)``."""
    ts = np.asarray(times, dtype=float).reshape(-1)
    amp = np.asarray(spec.amplitude)
    if spec.kind == "constant":
        return np.tile(amp, (ts.size, 1))
    if spec.kind == "step":
        return (ts >= spec.start)[:, None] * amp[None, :]
    if spec.kind == "pulse_train":
        on = np.zeros(ts.size, dtype=bool)
        for a, b in spec.windows:
            on |= (ts >= a) & (ts < b)
        return on[:, None] * amp[None, :]
    out = np.zeros((ts.size, amp.size))
    for axis in range(amp.size):
        for f, w, ph in zip(spec.freqs, spec.weights, spec.phases[axis]):
            out[:, axis] += amp[axis] * w * np.sin(2.0 * np.pi * f * ts + ph)
    return out


@dataclass(frozen=True)
class DisturbanceSet:
    """All disturbance specs of a run, summed per channel."""

    specs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))

    def channel(self, name: str) -> tuple:
        return tuple(s for s in self.specs if s.channel == name)

    def value(self, name: str, t: float, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        for s in self.specs:
            if s.channel == name:
                out += eval_disturbance(s, t)
        return out

    def samples(self, name: str, times, dim: int) -> np.ndarray:
        """Channel total at every time in ``times``, shape ``(len(times), dim)``."""
        ts = np.asarray(times, dtype=float).reshape(-1)
        out = np.zeros((ts.size, dim))
        for s in self.specs:
            if s.channel == name:
                out += sample_disturbance(s, ts)
        return out

    def windows(self) -> list[tuple[float, float]]:
        """Time windows where some signal is switched on, for plot shading."""
        spans = []
        for s in self.specs:
            if s.kind == "pulse_train":
                spans.extend(s.windows)
            elif s.kind == "step":
                spans.append((s.start, 1.0))
        return spans

