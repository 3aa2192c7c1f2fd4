"""Task-space trajectories, demonstration preprocessing and CSV exchange."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class InvalidDemonstrationError(ValueError):
    pass


def _frozen(a, ndim):
    arr = np.array(a, dtype=float)
    if arr.ndim == ndim - 1 and ndim == 2:
        arr = arr[:, None]
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-stamped sequence of task-space states.

    ``states`` has shape (n, d). ``velocities`` is optional and, when present,
    has the same shape. Arrays are stored read-only.
    """

    times: np.ndarray
    states: np.ndarray
    velocities: Optional[np.ndarray] = None
    truncated: bool = field(default=False)

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        times.setflags(write=False)
        states = _frozen(self.states, 2)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        if states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise InvalidDemonstrationError(
                f"states shape {states.shape} does not match {times.shape[0]} timestamps"
            )
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise InvalidDemonstrationError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(states)):
            raise InvalidDemonstrationError("states contain non-finite values")
        if self.velocities is not None:
            vel = _frozen(self.velocities, 2)
            if vel.shape != states.shape:
                raise InvalidDemonstrationError(
                    f"velocities shape {vel.shape} != states shape {states.shape}"
                )
            object.__setattr__(self, "velocities", vel)

    def __len__(self):
        return self.times.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]


@dataclass(frozen=True, eq=False)
class DomainBox:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        hi = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("DomainBox requires lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def around(cls, points, inflate=0.1):
        """Bounding box of ``points`` grown by ``inflate`` times its extent per side.

        Flat axes borrow the widest extent (or 1 when all points coincide).
        """
        pts = np.asarray(points, dtype=float)
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        widest = float(np.max(hi - lo))
        span = np.where(hi > lo, hi - lo, widest if widest > 0 else 1.0)
        return cls(lo - inflate * span, hi + inflate * span)

    def inflated(self, factor):
        """Box with the same center and each side scaled by ``factor``."""
        center = 0.5 * (self.lower + self.upper)
        half = 0.5 * (self.upper - self.lower) * factor
        return DomainBox(center - half, center + half)

    def contains(self, z) -> bool:
        z = np.asarray(z)
        return bool(np.all(z >= self.lower) and np.all(z <= self.upper))


def resample_demo(demo: Trajectory, n: int) -> Trajectory:
    """Resample onto ``n`` uniform samples of normalized time ``[0, 1]``.

    States are linearly interpolated. Velocities are recomputed on the new
    grid with central differences (one-sided at the endpoints), in units of
    normalized time.
    """
    if len(demo) < 2:
        raise InvalidDemonstrationError("a demonstration needs at least 2 samples")
    if n < 2:
        raise ValueError("n must be at least 2")
    t = demo.times
    s = (t - t[0]) / (t[-1] - t[0])
    grid = np.linspace(0.0, 1.0, n)
    states = np.column_stack([np.interp(grid, s, demo.states[:, k]) for k in range(demo.dim)])
    velocities = np.gradient(states, grid, axis=0, edge_order=1)
    return Trajectory(grid, states, velocities)


def mean_start(demos: Sequence[Trajectory]) -> np.ndarray:
    if len(demos) == 0:
        raise ValueError("mean_start needs at least one demonstration")
    dims = {d.dim for d in demos}
    if len(dims) != 1:
        raise ValueError(f"demonstrations have mixed dimensions {sorted(dims)}")
    return np.mean([d.states[0] for d in demos], axis=0)


# -- CSV exchange ------------------------------------------------------------

def write_trajectory_csv(path, traj: Trajectory) -> None:
    d = traj.dim
    header = ["t"] + [f"x{k + 1}" for k in range(d)]
    if traj.velocities is not None:
        header += [f"v{k + 1}" for k in range(d)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(traj)):
            row = [traj.times[i], *traj.states[i]]
            if traj.velocities is not None:
                row += list(traj.velocities[i])
            w.writerow([repr(float(x)) for x in row])


def read_trajectory_csv(path) -> Trajectory:
    """Read a demonstration file with header ``t,x1..xd[,v1..vd]``."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidDemonstrationError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t":
        raise InvalidDemonstrationError(f"{path}: first column must be 't', got {header[:1]}")
    xs = [h for h in header[1:] if h.startswith("x")]
    vs = [h for h in header[1:] if h.startswith("v")]
    d = len(xs)
    if d == 0 or xs != [f"x{k + 1}" for k in range(d)]:
        raise InvalidDemonstrationError(f"{path}: malformed state columns {header[1:]}")
    if vs and vs != [f"v{k + 1}" for k in range(d)]:
        raise InvalidDemonstrationError(f"{path}: velocity columns must be v1..v{d}")
    if len(header) != 1 + d + len(vs):
        raise InvalidDemonstrationError(f"{path}: unexpected columns in header {header}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise InvalidDemonstrationError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[0] < 2:
        raise InvalidDemonstrationError(f"{path}: needs at least 2 samples")
    if data.shape[1] != len(header):
        raise InvalidDemonstrationError(f"{path}: ragged rows")
    vel = data[:, 1 + d:] if vs else None
    return Trajectory(data[:, 0], data[:, 1:1 + d], vel)


def load_demo_dir(directory) -> list[Trajectory]:
    """Load every ``*.csv`` file in ``directory`` (sorted by name)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InvalidDemonstrationError(f"{directory}: not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix == ".csv")
    if not files:
        raise InvalidDemonstrationError(f"{directory}: no demonstration CSV files")
    return [read_trajectory_csv(p) for p in files]


def save_demo_dir(directory, demos: Iterable[Trajectory], prefix="demo") -> list[str]:
    os.makedirs(directory, exist_ok=True)
    paths = []
    for i, demo in enumerate(demos):
        p = os.path.join(directory, f"{prefix}_{i:02d}.csv")
        write_trajectory_csv(p, demo)
        paths.append(p)
    return paths
