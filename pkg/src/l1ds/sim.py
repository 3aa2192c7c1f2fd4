"""Closed-loop execution in the two regimes and DTW-based scoring.

Perfect regime: the task state integrates
``z' = f(z) + u_nom + u_a + sigma`` directly (RK4, inputs held per step).

Imperfect regime: the task stack only shapes a reference ``(z_ref, z_ref')``
that a per-axis PID tracks on a double-integrator plant, running ten Euler
substeps per outer step, with matched disturbances on the velocity channel
and unmatched ones on the position channel.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .clf import ClfConfig, clf_qp
from .disturbances import DisturbanceSet, DisturbanceSpec
from .dtw import DtwParams, dtw_distance, initial_selector, select_target
from .field import VectorFieldModel, rk4_step, rollout
from .l1 import L1Config, L1State, l1_control, predictor_step
from .trajectory import DomainBox, Trajectory

INNER_STEPS = 10


class DegenerateBaselineError(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class SelectorConfig:
    mode: str = "dtw"
    window_w: int = 50
    history_h: int = 40
    target_history: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("dtw", "time_indexed"):
            raise ValueError(f"selector mode must be 'dtw' or 'time_indexed', got {self.mode!r}")


@dataclass(frozen=True)
class PidGains:
    kp: float = 1600.0
    ki: float = 400.0
    kd: float = 80.0
    windup: Optional[float] = None  # clamp on |ki * integral|; None -> 10 x shape scale

    def __post_init__(self):
        if min(self.kp, self.ki, self.kd) < 0:
            raise ValueError("PID gains must be non-negative")


@dataclass(eq=False)
class RunResult:
    executed: Trajectory
    target: Trajectory
    reference: Trajectory
    selected: np.ndarray
    selector_indices: np.ndarray
    sigma_hat_trace: np.ndarray
    u_a_trace: np.ndarray
    u_nom_trace: np.ndarray
    sigma_trace: np.ndarray
    dm_trace: np.ndarray
    dum_trace: np.ndarray
    f_trace: np.ndarray
    dtw_raw: float
    truncated: bool
    regime: str = "perfect"
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return self.executed.times

    def tracking_error(self) -> np.ndarray:
        """``||z(t) - z*(t)||`` against the time-indexed nominal target."""
        return np.linalg.norm(self.executed.states - self.target.states, axis=1)

    def write_trace_csv(self, path) -> None:
        d = self.executed.dim
        cols = ["t"]
        for prefix in ("z", "zstar", "zref"):
            cols += [f"{prefix}{k + 1}" for k in range(d)]
        cols.append("k_sel")
        for prefix in ("unom", "ua", "sighat", "dm", "dum"):
            cols += [f"{prefix}{k + 1}" for k in range(d)]
        blocks = [self.executed.states, self.selected, self.reference.states]
        tail = [self.u_nom_trace, self.u_a_trace, self.sigma_hat_trace, self.dm_trace,
                self.dum_trace]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for i, t in enumerate(self.times):
                row = [repr(float(t))]
                for b in blocks:
                    row += [repr(float(x)) for x in b[i]]
                row.append(str(int(self.selector_indices[i])))
                for b in tail:
                    row += [repr(float(x)) for x in b[i]]
                w.writerow(row)


def _as_disturbances(spec) -> DisturbanceSet:
    if spec is None:
        return DisturbanceSet(())
    if isinstance(spec, DisturbanceSet):
        return spec
    if isinstance(spec, DisturbanceSpec):
        return DisturbanceSet((spec,))
    return DisturbanceSet(tuple(spec))


def _check_grid(n, dt):
    if n < 2:
        raise ValueError("n must be at least 2")
    grid_dt = 1.0 / (n - 1)
    if dt is None:
        return grid_dt
    if abs(dt - grid_dt) > 1e-12 * grid_dt:
        raise ValueError(f"dt must equal 1/(n-1) = {grid_dt!r}, got {dt!r}")
    return dt


class _TaskStack:
    """Target selection, CLF-QP and L1 for one run; state is threaded per step."""

    def __init__(self, model, clf_cfg, l1_cfg, selector_cfg, target_states, z0, dt,
                 rk4_model=False):
        self.model = model
        self.rk4_model = rk4_model
        self.clf_cfg = clf_cfg
        self.l1_cfg = l1_cfg
        self.sel_cfg = selector_cfg or SelectorConfig()
        self.target = target_states
        self.dt = dt
        self.d = target_states.shape[1]
        self.f_target = None
        self.selector = None
        if clf_cfg is not None:
            self.f_target = model(target_states)
            if self.sel_cfg.mode == "dtw":
                self.selector = initial_selector(
                    target_states, z0, self.sel_cfg.history_h, self.sel_cfg.window_w,
                    self.sel_cfg.target_history)
        self.l1_state = L1State.initial(l1_cfg, z0, dt) if l1_cfg is not None else None

    def step(self, k, z, f_z, history):
        n = self.target.shape[0]
        if self.selector is not None:
            k_sel, _, self.selector = select_target(self.selector, history, self.target)
        else:
            k_sel = min(k, n - 1)
        zs = self.target[k_sel]
        if self.clf_cfg is not None:
            u_nom = clf_qp(self.clf_cfg, f_z, self.f_target[k_sel], z - zs)
        else:
            u_nom = np.zeros(self.d)
        if self.l1_state is not None:
            st = l1_control(self.l1_cfg, self.l1_state, z, self.dt)
            u_a = st.u_a
            f_known = self._known_field(z, f_z, u_nom, u_a)
            self.l1_state = predictor_step(self.l1_cfg, st, z, f_known, u_nom, self.dt)
            sigma_hat = self.l1_state.sigma_hat
        else:
            u_a = np.zeros(self.d)
            sigma_hat = np.zeros(self.d)
        return k_sel, zs, u_nom, u_a, sigma_hat


    def _known_field(self, z, f_z, u_nom, u_a):
        """Field input for the predictor's Euler step.

        In the perfect regime the plant integrates the known dynamics with
        RK4, so the predictor is fed the step-averaged field of that RK4 step;
        with zero uncertainty its prediction then matches the plant exactly.
        """
        if not self.rk4_model:
            return f_z
        drive = u_nom + u_a
        z1 = rk4_step(lambda x: self.model(x) + drive, z, self.dt)
        return (z1 - z) / self.dt - drive


def _default_box(target_states):
    return DomainBox.around(target_states, inflate=0.1).inflated(5.0)


def nominal_target(model: VectorFieldModel, z_star0, n: int) -> Trajectory:
    """Target sequence of ``n`` points on the uniform grid over ``[0, 1]``."""
    dt = 1.0 / (n - 1)
    return rollout(model, z_star0, dt, n - 1)


class _Recorder:
    def __init__(self, n, d):
        self.arrays = {name: np.zeros((n, d)) for name in
                       ("z", "zstar", "zref", "unom", "ua", "sighat", "sigma", "dm", "dum", "f")}
        self.k_sel = np.zeros(n, dtype=np.int64)

    def fill_from(self, k):
        # hold the last recorded sample after truncation so traces share the grid
        for arr in self.arrays.values():
            arr[k:] = arr[k - 1]
        self.k_sel[k:] = self.k_sel[k - 1]


def _finish(rec, target, times, truncated, regime, band, meta):
    a = rec.arrays
    executed = Trajectory(times, a["z"], truncated=truncated)
    reference = Trajectory(times, a["zref"])
    raw = dtw_distance(executed.states, target.states, band)
    return RunResult(executed, target, reference, a["zstar"], rec.k_sel, a["sighat"], a["ua"],
                     a["unom"], a["sigma"], a["dm"], a["dum"], a["f"], raw, truncated, regime,
                     meta)


def run_perfect(model: VectorFieldModel, clf_cfg: Optional[ClfConfig],
                l1_cfg: Optional[L1Config], selector_cfg: Optional[SelectorConfig],
                sigma: Union[None, DisturbanceSet, Sequence[DisturbanceSpec]], z0, n: int,
                dt: Optional[float] = None, *, z_star0=None, target: Optional[Trajectory] = None,
                state_gain=None, hold: Optional[tuple] = None, box: Optional[DomainBox] = None,
                band: Optional[DtwParams] = None) -> RunResult:
    """Direct task-space integration under the task-level discrepancy ``sigma``.

    ``sigma`` is time-scripted (task-channel specs) plus ``state_gain @ z``
    when ``state_gain`` is given. ``hold=(start, stop)`` freezes the executed
    state over that window of normalized time. Passing ``clf_cfg=None`` runs
    without the stabilizer (``u_nom = 0``); ``l1_cfg=None`` disables L1.
    """
    dt = _check_grid(n, dt)
    z0 = np.asarray(z0, dtype=float)
    if target is None:
        target = nominal_target(model, z0 if z_star0 is None else z_star0, n)
    if len(target) != n:
        raise ValueError("target must have n samples")
    dist = _as_disturbances(sigma)
    gain = None if state_gain is None else np.asarray(state_gain, dtype=float)
    box = box or _default_box(target.states)
    d = z0.size
    stack = _TaskStack(model, clf_cfg, l1_cfg, selector_cfg, target.states, z0, dt,
                       rk4_model=True)
    rec = _Recorder(n, d)
    A = rec.arrays
    times = dt * np.arange(n)
    z = z0.copy()
    sig_script = dist.samples("task", times, d)
    truncated = False
    for k in range(n):
        t = times[k]
        f_z = model(z)
        A["z"][k] = z
        k_sel, zs, u_nom, u_a, sig_hat = stack.step(k, z, f_z, A["z"][max(0, k - 200):k + 1])
        sig = sig_script[k]
        if gain is not None:
            sig = sig + gain @ z
        rec.k_sel[k] = k_sel
        A["zstar"][k], A["unom"][k], A["ua"][k], A["sighat"][k] = zs, u_nom, u_a, sig_hat
        A["sigma"][k], A["f"][k] = sig, f_z
        A["zref"][k] = z if k == 0 else A["zref"][k - 1] + dt * (A["f"][k - 1] + A["unom"][k - 1]
                                                                 + A["ua"][k - 1])
        if k == n - 1:
            break
        if hold is not None and hold[0] <= t < hold[1]:
            continue
        drive = u_nom + u_a + sig
        z = rk4_step(lambda x: model(x) + drive, z, dt)
        if not (np.all(np.isfinite(z)) and box.contains(z)):
            truncated = True
            rec.fill_from(k + 1)
            break
    meta = {"clf": clf_cfg is not None, "l1": l1_cfg is not None}
    return _finish(rec, target, times, truncated, "perfect", band, meta)


def pid_track(pid: PidGains, p, v, integ, p_r0, v_r, h, dm, dum, lim=None):
    """Euler substeps of the PID-driven double integrator.

    The reference moves as ``p_r = p_r0 + tau * v_r``; ``dm`` and ``dum`` hold one
    row per substep. Returns the new ``(p, v, integral)``.
    """
    for s in range(len(dm)):
        e = p_r0 + (s * h) * v_r - p
        integ = integ + h * e
        if lim is not None:
            integ = np.minimum(np.maximum(integ, -lim), lim)
        u = pid.kp * e + pid.kd * (v_r - v) + pid.ki * integ
        p_dot = v + dum[s]
        v = v + h * (u + dm[s])
        p = p + h * p_dot
    return p, v, integ


def run_imperfect(model: VectorFieldModel, clf_cfg: Optional[ClfConfig],
                  l1_cfg: Optional[L1Config], selector_cfg: Optional[SelectorConfig],
                  dm_spec, dum_spec, pid_gains: Optional[PidGains], z0, n: int,
                  dt: Optional[float] = None, *, z_star0=None,
                  target: Optional[Trajectory] = None, box: Optional[DomainBox] = None,
                  band: Optional[DtwParams] = None) -> RunResult:
    """Plant + PID execution of the task-level reference.

    Each outer step the stack computes ``z_ref' = f(z) + u_nom + u_a`` from
    the measured plant position ``z``. Over the step the PID tracks
    ``p_r = z_ref + tau * z_ref'`` and ``v_r = z_ref'``; ``z_ref`` is then
    advanced by ``dt * z_ref'``. The plant starts at ``z0`` moving with
    ``f(z0)``.
    """
    dt = _check_grid(n, dt)
    pid = pid_gains or PidGains()
    z0 = np.asarray(z0, dtype=float)
    if target is None:
        target = nominal_target(model, z0 if z_star0 is None else z_star0, n)
    dm = _as_disturbances(dm_spec)
    dum = _as_disturbances(dum_spec)
    if dm.channel("task") or dum.channel("task"):
        raise ValueError("task-channel (sigma) disturbances belong to the perfect regime")
    box = box or _default_box(target.states)
    windup = pid.windup
    if windup is None:
        windup = 10.0 * float(np.max(np.abs(target.states)))
    d = z0.size
    stack = _TaskStack(model, clf_cfg, l1_cfg, selector_cfg, target.states, z0, dt)
    rec = _Recorder(n, d)
    A = rec.arrays
    times = dt * np.arange(n)
    h = dt / INNER_STEPS
    # disturbance samples on the inner grid: row k * INNER_STEPS + s is time t_k + s * h
    inner_t = (times[:-1, None] + h * np.arange(INNER_STEPS)[None, :]).ravel()
    dm_inner = dm.samples("matched", inner_t, d)
    dum_inner = dum.samples("unmatched", inner_t, d)
    dm_outer = dm.samples("matched", times, d)
    dum_outer = dum.samples("unmatched", times, d)
    lim = windup / pid.ki if pid.ki > 0 else None
    p = z0.copy()
    v = model(z0)
    integ = np.zeros(d)
    z_ref = z0.copy()
    truncated = False
    for k in range(n):
        f_z = model(p)
        A["z"][k] = p
        k_sel, zs, u_nom, u_a, sig_hat = stack.step(k, p, f_z, A["z"][max(0, k - 200):k + 1])
        zdot_ref = f_z + u_nom + u_a
        rec.k_sel[k] = k_sel
        A["zstar"][k], A["unom"][k], A["ua"][k], A["sighat"][k] = zs, u_nom, u_a, sig_hat
        A["zref"][k], A["f"][k] = z_ref, f_z
        A["dm"][k] = dm_outer[k]
        A["dum"][k] = dum_outer[k]
        if k == n - 1:
            break
        rows = slice(k * INNER_STEPS, (k + 1) * INNER_STEPS)
        p, v, integ = pid_track(pid, p, v, integ, z_ref, zdot_ref, h, dm_inner[rows],
                                dum_inner[rows], lim)
        z_ref = p + dt * zdot_ref
        if not (np.all(np.isfinite(p)) and box.contains(p)):
            truncated = True
            rec.fill_from(k + 1)
            break
    meta = {"clf": clf_cfg is not None, "l1": l1_cfg is not None, "pid": pid}
    return _finish(rec, target, times, truncated, "imperfect", band, meta)


def normalized_dtw(variant: RunResult, baseline: RunResult,
                   band: Optional[DtwParams] = None) -> float:
    """``DTW(variant, z*) / DTW(baseline, z*)`` against the shared target."""
    if (variant.target.states.shape != baseline.target.states.shape
            or not np.array_equal(variant.target.states, baseline.target.states)):
        raise ValueError("variant and baseline must share the same target trajectory")
    target = baseline.target.states
    base = dtw_distance(baseline.executed.states, target, band)
    if base == 0.0:
        raise DegenerateBaselineError("baseline DTW score is zero; normalization undefined")
    return dtw_distance(variant.executed.states, target, band) / base


def dtw_scale(target: Trajectory) -> float:
    """DTW between the target and its centroid (a one-point sequence)."""
    c = target.states.mean(axis=0, keepdims=True)
    return dtw_distance(target.states, c)
