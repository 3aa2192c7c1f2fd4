"""Min-norm CLF-QP stabilizer for the tracking error ``e = z - z*``."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class ClfConfig:
    """Quadratic CLF ``V(e) = e^T P e`` with decay rate ``c``."""

    c: float = 50.0
    p_matrix: np.ndarray = field(default=None)
    dim: int = 2

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("CLF decay rate c must be positive")
        p = np.eye(self.dim) if self.p_matrix is None else np.array(self.p_matrix, dtype=float)
        if p.ndim == 1:
            p = np.diag(p)
        if p.shape[0] != p.shape[1] or not np.allclose(p, p.T):
            raise ValueError("P must be a symmetric square matrix")
        eig = np.linalg.eigvalsh(p)
        if eig[0] <= 0:
            raise ValueError("P must be positive definite")
        p.setflags(write=False)
        object.__setattr__(self, "p_matrix", p)
        object.__setattr__(self, "dim", p.shape[0])
        object.__setattr__(self, "_eig", eig)

    @property
    def alpha1(self) -> float:
        return float(self._eig[0])

    @property
    def alpha2(self) -> float:
        return float(self._eig[-1])

    @property
    def lam(self) -> float:
        return 0.5 * self.c

    def delta_b(self, rho: float) -> float:
        """Bound on ``||grad V||`` over the ball of radius ``rho``."""
        return 2.0 * self.alpha2 * rho


def clf_value(cfg: ClfConfig, e) -> float:
    e = np.asarray(e, dtype=float)
    if e.shape != (cfg.dim,):
        raise ValueError(f"expected error of dimension {cfg.dim}, got shape {e.shape}")
    return float(e @ cfg.p_matrix @ e)


def clf_qp(cfg: ClfConfig, f_at_z, f_at_zstar, e) -> np.ndarray:
    """Closed-form solution of ``min 1/2||u||^2 s.t. a^T (df + u) + c V <= 0``.

    With ``a = 2 P e`` and ``b = a^T df + c V``: ``u = 0`` if ``b <= 0``,
    otherwise ``u = -(b / ||a||^2) a``.
    """
    e = np.asarray(e, dtype=float)
    df = np.asarray(f_at_z, dtype=float) - np.asarray(f_at_zstar, dtype=float)
    if e.shape != (cfg.dim,) or df.shape != (cfg.dim,):
        raise ValueError("clf_qp inputs must all have the CLF dimension")
    if not (np.all(np.isfinite(e)) and np.all(np.isfinite(df))):
        raise ValueError("clf_qp received non-finite input")
    if not np.any(e):
        return np.zeros(cfg.dim)
    # work with e / max|e_i| so tiny errors cannot underflow ||a||^2; with
    # e = m * eh the solution is -(bh / (2 ||P eh||^2)) P eh, bh = b / m
    m = float(np.max(np.abs(e)))
    eh = e / m
    ph = cfg.p_matrix @ eh
    bh = 2.0 * (ph @ df) + cfg.c * m * (eh @ ph)
    if bh <= 0.0:
        return np.zeros(cfg.dim)
    pp = ph @ ph
    assert pp > 0.0, "grad V vanished at e != 0; P is not positive definite"
    return -(bh / (2.0 * pp)) * ph
