"""Synthetic 2-D demonstration sets.

Non-periodic shapes run along their path with a saturated-linear speed
profile: the remaining path fraction ``r`` obeys
``r' = -CRUISE * tanh(decay * r / CRUISE)``, i.e. roughly constant speed far
from the attractor and exponential convergence near it. The motion has
settled on the origin shortly before ``t = 1``, the way handwriting
demonstrations do, and the implied vector field is Lipschitz. ``circle`` is
periodic and runs at constant speed.
"""

from __future__ import annotations

import numpy as np

from .trajectory import Trajectory

SHAPES = ("line", "sine", "angle", "circle")
CRUISE = 1.5  # path fractions per unit time away from the attractor


def _progress(t, decay):
    # closed-form solution of r' = -v tanh(k r / v), r(0) = 1; returns 1 - r
    v, k = CRUISE, decay
    r = (v / k) * np.arcsinh(np.sinh(k / v) * np.exp(-k * t))
    return 1.0 - r


def _path(shape, s, amplitude, frequency):
    a = amplitude
    if shape == "line":
        start = np.array([-a, -0.6 * a])
        return (1.0 - s)[:, None] * start
    if shape == "sine":
        x = -2.0 * a * (1.0 - s)
        y = 0.5 * a * np.sin(2.0 * np.pi * frequency * (1.0 - s))
        return np.column_stack([x, y])
    if shape == "angle":
        p0 = np.array([-a, 0.0])
        p1 = np.array([-0.5 * a, 1.2 * a])
        u = s[:, None]
        return (1 - u) ** 2 * p0 + 2 * u * (1 - u) * p1
    raise ValueError(f"unknown shape {shape!r}; choose from {SHAPES}")


def generate_demos(shape: str, n_demos: int = 4, n_samples: int = 1000,
                   amplitude: float = 1.0, frequency: float = 1.0, noise: float = 0.02,
                   decay: float = 10.0, seed: int = 0) -> list[Trajectory]:
    """Noisy demonstrations of ``shape`` on ``t in [0, 1]``.

    Each demo is displaced by an offset of length ``noise * amplitude``; the
    offset directions are evenly spaced around the circle, with a random
    common rotation drawn from ``seed``. For non-periodic shapes the offset fades out along the
    motion so every demo still reaches the origin; ``decay`` sets how fast
    they converge on it.
    """
    if not decay > 0:
        raise ValueError("decay must be positive")
    if shape not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}; choose from {SHAPES}")
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, n_samples)
    theta0 = rng.uniform(0.0, 2.0 * np.pi)
    demos = []
    for i in range(n_demos):
        theta = theta0 + 2.0 * np.pi * i / n_demos
        offset = noise * amplitude * np.array([np.cos(theta), np.sin(theta)])
        if shape == "circle":
            phase = 2.0 * np.pi * frequency * t
            pts = amplitude * np.column_stack([np.cos(phase), np.sin(phase)]) + offset
        else:
            s = _progress(t, decay)
            pts = _path(shape, s, amplitude, frequency) + (1.0 - s)[:, None] * offset
        demos.append(Trajectory(t, pts))
    return demos
