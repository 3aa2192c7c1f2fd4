"""Learned vector-field model (Gaussian RBF + affine terms) and RK4 rollout."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.cluster.vq import kmeans2

from .trajectory import DomainBox, Trajectory


class SingularFitError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True, eq=False)
class VectorFieldModel:
    """``f(z) = W_rbf^T phi(z) + W_lin^T z + b`` with Gaussian features.

    ``weights`` stacks the RBF rows, then ``d`` linear rows, then the bias row,
    giving shape ``(num_centers + d + 1, d)``.
    """

    centers: np.ndarray
    bandwidth: float
    weights: np.ndarray
    jacobian_bound: float = float("inf")

    def __post_init__(self):
        centers = np.array(self.centers, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if centers.ndim != 2:
            raise ValueError("centers must be a (K, d) array")
        k, d = centers.shape
        if weights.shape != (k + d + 1, d):
            raise ValueError(f"weights must have shape {(k + d + 1, d)}, got {weights.shape}")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite")
        centers.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def num_centers(self) -> int:
        return self.centers.shape[0]

    def features(self, z):
        """Feature matrix for a batch ``z`` of shape (n, d)."""
        z = np.atleast_2d(z)
        sq = ((z[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
        phi = np.exp(-sq / (2.0 * self.bandwidth**2))
        return np.hstack([phi, z, np.ones((z.shape[0], 1))])

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.dim:
            raise ValueError(f"expected state of dimension {self.dim}, got {z.shape[-1]}")
        if z.ndim == 1:
            k = self.num_centers
            diff = self.centers - z
            phi = np.exp(-np.einsum("ij,ij->i", diff, diff) / (2.0 * self.bandwidth**2))
            w = self.weights
            return phi @ w[:k] + z @ w[k:-1] + w[-1]
        return self.features(z) @ self.weights

    def jacobian(self, z):
        """Analytic Jacobian; ``z`` of shape (d,) or (n, d)."""
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        z = np.atleast_2d(z)
        k = self.num_centers
        diff = z[:, None, :] - self.centers[None, :, :]  # (n, K, d)
        phi = np.exp(-(diff**2).sum(axis=2) / (2.0 * self.bandwidth**2))
        dphi = -phi[:, :, None] * diff / self.bandwidth**2  # (n, K, d)
        # J[n, out, in] = sum_k W[k, out] * dphi[n, k, in] + W_lin[in, out]
        jac = np.einsum("ko,nki->noi", self.weights[:k], dphi) + self.weights[k:-1].T[None]
        return jac[0] if single else jac

    def to_dict(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "bandwidth": self.bandwidth,
            "weights": self.weights.tolist(),
            "jacobian_bound": self.jacobian_bound,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VectorFieldModel":
        return cls(
            np.array(data["centers"]), data["bandwidth"], np.array(data["weights"]),
            float(data["jacobian_bound"]),
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "VectorFieldModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def eval_field(model: VectorFieldModel, z) -> np.ndarray:
    return model(np.asarray(z, dtype=float))


def _probe_grid(box: DomainBox, per_axis: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.ravel() for m in mesh])


def estimate_jacobian_bound(model: VectorFieldModel, box: DomainBox, per_axis=50,
                            safety=1.2, chunk=4096) -> float:
    """Max spectral norm of the Jacobian over a probe grid, times ``safety``."""
    pts = _probe_grid(box, per_axis)
    best = 0.0
    for i in range(0, len(pts), chunk):
        jac = model.jacobian(pts[i:i + chunk])
        best = max(best, float(np.linalg.norm(jac, ord=2, axis=(1, 2)).max()))
    return safety * best


def fit_rbf(demos: Sequence[Trajectory], num_centers: int, bandwidth: float,
            ridge: float = 1e-6, seed: int = 0) -> VectorFieldModel:
    """Ridge regression of demonstration velocities on RBF + affine features.

    Centers come from k-means (k-means++ init, seeded) on all demonstration
    states. Demonstrations must carry velocities (see ``resample_demo``).
    """
    if not demos:
        raise ValueError("fit_rbf needs at least one demonstration")
    if any(d.velocities is None for d in demos):
        raise ValueError("demonstrations must carry velocities; resample them first")
    X = np.vstack([d.states for d in demos])
    Y = np.vstack([d.velocities for d in demos])
    if num_centers < 1 or num_centers > len(X):
        raise ValueError(f"num_centers must be in [1, {len(X)}]")
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")

    rng = np.random.default_rng(seed)
    uniq = np.unique(X, axis=0)
    if len(uniq) <= num_centers:
        centers = np.vstack([uniq, uniq[rng.integers(len(uniq), size=num_centers - len(uniq))]])
    else:
        centers, _ = kmeans2(X, num_centers, minit="++", seed=rng)

    d = X.shape[1]
    proto = VectorFieldModel(centers, bandwidth, np.zeros((num_centers + d + 1, d)))
    F = proto.features(X)
    gram = F.T @ F
    if ridge == 0.0:
        if np.linalg.matrix_rank(gram) < gram.shape[0]:
            raise SingularFitError(
                "normal equations are singular with ridge=0; use a positive ridge"
            )
    else:
        gram = gram + ridge * np.eye(gram.shape[0])
    weights = np.linalg.solve(gram, F.T @ Y)
    model = VectorFieldModel(centers, bandwidth, weights)
    box = DomainBox.around(X, inflate=0.1)
    bound = estimate_jacobian_bound(model, box)
    return VectorFieldModel(centers, bandwidth, weights, bound)


def training_residual(model: VectorFieldModel, demos: Sequence[Trajectory]) -> float:
    """Mean squared velocity error over all demonstration samples."""
    X = np.vstack([d.states for d in demos])
    Y = np.vstack([d.velocities for d in demos])
    return float(np.mean(np.sum((model(X) - Y) ** 2, axis=1)))


def rk4_step(f: Callable[[np.ndarray], np.ndarray], z: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(z)
    k2 = f(z + 0.5 * dt * k1)
    k3 = f(z + 0.5 * dt * k2)
    k4 = f(z + dt * k3)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rollout(model, z0, dt: float, n: int, box: Optional[DomainBox] = None) -> Trajectory:
    """Integrate ``z' = f(z)`` with fixed-step RK4 for ``n`` steps.

    Returns ``n + 1`` states. If ``box`` is given and the state leaves it, the
    rollout stops there and the result has ``truncated=True``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = np.asarray(z0, dtype=float).copy()
    states = [z]
    truncated = False
    for _ in range(n):
        z = rk4_step(model, z, dt)
        if not np.all(np.isfinite(z)) or (box is not None and not box.contains(z)):
            truncated = True
            break
        states.append(z)
    states = np.array(states)
    times = dt * np.arange(len(states))
    return Trajectory(times, states, truncated=truncated)
