"""L1 adaptive augmentation: state predictor, piecewise-constant adaptation,
first-order low-pass filter, and the tube/ultimate-bound certificate.

The input channel is the identity (task-level velocity), so every estimated
uncertainty component is matched.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np


class L1ConfigError(ValueError):
    pass


class SingularBandwidthError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class L1Config:
    a_s_diag: np.ndarray
    omega: float = 30.0
    t_sample: float = 1e-3

    def __post_init__(self):
        a = np.array(self.a_s_diag, dtype=float).reshape(-1)
        if a.size == 0 or not np.all(a < 0):
            raise L1ConfigError("A_s must be Hurwitz: every diagonal entry must be negative")
        if not self.omega > 0:
            raise L1ConfigError("filter bandwidth omega must be positive")
        if not self.t_sample > 0:
            raise L1ConfigError("sampling period t_sample must be positive")
        a.setflags(write=False)
        object.__setattr__(self, "a_s_diag", a)
        # -Phi^{-1}(Ts) e^{As Ts} for diagonal As, per axis
        e = np.exp(a * self.t_sample)
        object.__setattr__(self, "_adapt_gain", -(a * e) / np.expm1(a * self.t_sample))

    @property
    def dim(self) -> int:
        return self.a_s_diag.size

    def steps_per_sample(self, dt: float) -> int:
        """Number of simulation steps per adaptation period; ``dt`` must divide it."""
        if not dt > 0:
            raise L1ConfigError("dt must be positive")
        ratio = self.t_sample / dt
        m = int(round(ratio))
        if m < 1 or abs(ratio - m) > 1e-9 * max(1.0, ratio):
            raise L1ConfigError(
                f"t_sample={self.t_sample!r} is not an integer multiple of dt={dt!r}"
            )
        return m


@dataclass(frozen=True, eq=False)
class L1State:
    z_hat: np.ndarray
    sigma_hat: np.ndarray
    u_a: np.ndarray
    steps_since_sample: int = 0

    @classmethod
    def initial(cls, cfg: L1Config, z0, dt: float) -> "L1State":
        """Predictor starts at the measured state, estimate and input at zero."""
        cfg.steps_per_sample(dt)
        z0 = np.array(z0, dtype=float)
        if z0.shape != (cfg.dim,):
            raise L1ConfigError(f"state dimension {z0.shape} does not match A_s ({cfg.dim})")
        zero = np.zeros(cfg.dim)
        return cls(z0, zero, zero.copy(), 0)


def predictor_step(cfg: L1Config, st: L1State, z, f_at_z, u_nom, dt: float) -> L1State:
    """One forward-Euler step of ``zh' = f + u_nom + u_a + sigma_hat + A_s (zh - z)``."""
    cfg.steps_per_sample(dt)
    z = np.asarray(z, dtype=float)
    dz_hat = (np.asarray(f_at_z) + np.asarray(u_nom) + st.u_a + st.sigma_hat
              + cfg.a_s_diag * (st.z_hat - z))
    z_hat = st.z_hat + dt * dz_hat
    if not np.all(np.isfinite(z_hat)):
        raise FloatingPointError("state predictor produced non-finite values")
    return replace(st, z_hat=z_hat, steps_since_sample=st.steps_since_sample + 1)


def adaptation_update(cfg: L1Config, z_tilde) -> np.ndarray:
    """Piecewise-constant law ``sigma_hat = -Phi^{-1}(Ts) e^{As Ts} z_tilde``."""
    return cfg._adapt_gain * np.asarray(z_tilde, dtype=float)


def filter_step(cfg: L1Config, st: L1State, dt: float) -> L1State:
    """Exact ZOH step of ``u_a' = -omega u_a - omega sigma_hat``."""
    decay = math.exp(-cfg.omega * dt)
    u_a = decay * st.u_a - (1.0 - decay) * st.sigma_hat
    return replace(st, u_a=u_a)


def l1_step(cfg: L1Config, st: L1State, z, f_at_z, u_nom, dt: float):
    """Advance the controller by one simulation step and return ``(state, u_a)``.

    At a sampling instant the estimate is refreshed from the current
    prediction error ``z_hat - z``. The filter then integrates the held
    estimate over the step, and the predictor is propagated with the input
    that is actually applied over ``[t, t + dt)``.
    """
    st = l1_control(cfg, st, z, dt)
    st = predictor_step(cfg, st, z, f_at_z, u_nom, dt)
    return st, st.u_a


def l1_control(cfg: L1Config, st: L1State, z, dt: float) -> L1State:
    """First half of ``l1_step``: adaptation (at sampling instants) and filter.

    Callers that need ``u_a`` before choosing the predictor's field input
    run this, then ``predictor_step``.
    """
    m = cfg.steps_per_sample(dt)
    if st.steps_since_sample == 0 or st.steps_since_sample >= m:
        sigma = adaptation_update(cfg, st.z_hat - np.asarray(z, dtype=float))
        st = replace(st, sigma_hat=sigma, steps_since_sample=0)
    return filter_step(cfg, st, dt)


# -- certificate ---------------------------------------------------------------

@dataclass(frozen=True)
class CertificateInputs:
    delta_sigma: float
    l_sigma_z: float
    delta_f: float
    delta_nom: float
    delta_sigma_hat: float
    delta_b: float
    alpha1: float
    alpha2: float
    lam: float
    v0: float
    epsilon: float
    dim: int
    a_s_diag: tuple
    omega: float
    t_sample: float
    t1_minus_t0: float = 0.0

    @property
    def phi1(self) -> float:
        return self.delta_f + self.delta_nom + self.delta_sigma_hat + self.delta_sigma

    @property
    def rho(self) -> float:
        # worst-case ||e(t0)|| consistent with V0 is sqrt(V0 / alpha1)
        e0 = math.sqrt(self.v0 / self.alpha1)
        return e0 * math.sqrt(self.alpha2 / self.alpha1) + self.epsilon


@dataclass(frozen=True)
class CertificateReport:
    zeta1: float
    zeta2: float
    zeta3: float
    zeta4: float
    rho: float
    condition_bandwidth_ok: bool
    ts_max: float
    condition_ts_ok: bool
    ultimate_bound_mu: float

    @property
    def ok(self) -> bool:
        return self.condition_bandwidth_ok and self.condition_ts_ok


def certify(inp: CertificateInputs) -> CertificateReport:
    values = [inp.delta_sigma, inp.l_sigma_z, inp.delta_f, inp.delta_nom, inp.delta_sigma_hat,
              inp.delta_b, inp.alpha1, inp.alpha2, inp.lam, inp.v0, inp.epsilon, inp.omega,
              inp.t_sample, inp.t1_minus_t0, *inp.a_s_diag]
    if not all(math.isfinite(v) for v in values):
        raise ValueError("certificate inputs must be finite")
    if inp.alpha1 <= 0 or inp.alpha2 <= 0 or inp.lam <= 0 or inp.epsilon <= 0:
        raise ValueError("alpha1, alpha2, lambda and epsilon must be positive")
    gap = abs(2.0 * inp.lam - inp.omega)
    if gap == 0.0:
        raise SingularBandwidthError(
            f"omega={inp.omega} equals 2*lambda; choose a filter bandwidth well above 2*lambda"
        )
    if gap < 0.1 * inp.omega:
        warnings.warn(f"omega={inp.omega} is close to 2*lambda={2 * inp.lam}", stacklevel=2)

    sqd = math.sqrt(inp.dim)
    phi1 = inp.phi1
    zeta1 = inp.delta_sigma / gap + inp.l_sigma_z * phi1 / (2.0 * inp.lam * inp.omega)
    zeta2 = (2.0 * sqd * inp.l_sigma_z * phi1
             + sqd * max(abs(a) for a in inp.a_s_diag) * inp.delta_sigma)
    zeta3 = inp.delta_sigma * inp.omega
    zeta4 = inp.delta_b * (zeta2 + zeta3) / (2.0 * inp.lam)

    rho = inp.rho
    margin = inp.alpha1 * rho**2 - inp.v0 - inp.delta_b * zeta1
    bandwidth_ok = margin > 0.0
    if zeta4 > 0.0:
        ts_max = margin / zeta4
    else:
        ts_max = math.inf if margin > 0.0 else -math.inf
    ts_ok = bandwidth_ok and inp.t_sample <= ts_max
    mu_sq = (math.exp(-2.0 * inp.lam * inp.t1_minus_t0) * inp.v0 + inp.delta_b * zeta1
             + zeta4 * inp.t_sample) / inp.alpha1
    return CertificateReport(zeta1, zeta2, zeta3, zeta4, rho, bandwidth_ok, ts_max, ts_ok,
                             math.sqrt(mu_sq))
