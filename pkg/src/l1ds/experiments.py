"""Glue between an ``ExperimentConfig`` and the library: demos, models, runs,
certificate estimation and batch score tables."""

from __future__ import annotations

import csv
import dataclasses
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .clf import ClfConfig, clf_value
from .config import AUTO, BatchSection, ConfigError, ExperimentConfig, RegimeSection
from .disturbances import DisturbanceSet
from .dtw import DtwParams
from .field import VectorFieldModel, fit_rbf, training_residual
from .l1 import CertificateInputs, CertificateReport, L1Config, certify
from .shapes import generate_demos
from .sim import (PidGains, RunResult, SelectorConfig, nominal_target, normalized_dtw,
                  run_imperfect, run_perfect)
from .trajectory import load_demo_dir, mean_start, resample_demo


# -- building blocks ----------------------------------------------------------

def load_demos(cfg: ExperimentConfig, seed: int):
    """Demonstrations for one repetition seed, resampled onto the run grid."""
    sh, pre = cfg.shape, cfg.preprocessing
    if sh.source == "synthetic":
        raw = generate_demos(sh.name, n_demos=pre.demo_count or 4, amplitude=sh.amplitude,
                             frequency=sh.frequency, noise=sh.noise, decay=sh.decay,
                             seed=seed)
    else:
        raw = load_demo_dir(sh.demo_dir)
        if pre.demo_count is not None:
            raw = raw[:pre.demo_count]
    return [resample_demo(d, pre.n) for d in raw]


def build_model(cfg: ExperimentConfig, seed: int):
    """Return ``(model, demos, report)``; the report holds fit diagnostics."""
    demos = load_demos(cfg, seed)
    m = cfg.model
    if m.path is not None:
        model = VectorFieldModel.load(m.path)
    else:
        model = fit_rbf(demos, m.num_centers, m.bandwidth, m.ridge, seed=seed)
    report = {"seed": seed, "residual": training_residual(model, demos),
              "jacobian_bound": model.jacobian_bound, "num_centers": model.num_centers}
    return model, demos, report


def grid_dt(cfg: ExperimentConfig) -> float:
    return 1.0 / (cfg.preprocessing.n - 1)


def clf_config(cfg: ExperimentConfig, dim: int) -> ClfConfig:
    p = None if cfg.clf.p_diag is None else np.array(cfg.clf.p_diag, dtype=float)
    return ClfConfig(c=cfg.clf.c, p_matrix=p, dim=dim)


def l1_config(cfg: ExperimentConfig, dim: int) -> L1Config:
    a = np.array(cfg.l1.a_s_diag, dtype=float)
    if a.size != dim:
        raise ConfigError(f"l1.a_s_diag has {a.size} entries for a {dim}-D task space")
    ts = cfg.l1.t_sample if cfg.l1.t_sample is not None else grid_dt(cfg)
    return L1Config(a, omega=cfg.l1.omega, t_sample=ts)


def selector_config(cfg: ExperimentConfig) -> SelectorConfig:
    s = cfg.selector
    return SelectorConfig(s.mode, s.window_w, s.history_h, s.target_history)


def dtw_params(cfg: ExperimentConfig) -> DtwParams:
    return DtwParams(cfg.dtw.band)


def with_controller(cfg: ExperimentConfig, controller: str) -> ExperimentConfig:
    """Set the stack flags for ``nominal``, ``clf`` (CLF only) or ``l1`` (CLF + L1)."""
    flags = {"nominal": (False, False), "clf": (True, False), "l1": (True, True)}
    if controller not in flags:
        raise ConfigError(f"unknown controller {controller!r}")
    clf_on, l1_on = flags[controller]
    return dataclasses.replace(cfg, clf=dataclasses.replace(cfg.clf, enabled=clf_on),
                               l1=dataclasses.replace(cfg.l1, enabled=l1_on))


def controller_name(cfg: ExperimentConfig) -> str:
    if not cfg.clf.enabled:
        return "l1_only" if cfg.l1.enabled else "nominal"
    return "l1" if cfg.l1.enabled else "clf"


def start_states(cfg: ExperimentConfig, demos, regime: Optional[RegimeSection] = None):
    """``(z_star0, z0)``: target start at the mean demo start, plus the configured offset."""
    regime = regime or cfg.regime
    z_star0 = mean_start(demos)
    z0 = z_star0.copy()
    if regime.z0_offset is not None:
        off = np.array(regime.z0_offset, dtype=float)
        if off.shape != z0.shape:
            raise ConfigError("regime.z0_offset must match the task-space dimension")
        z0 = z0 + off
    return z_star0, z0


def run_config(cfg: ExperimentConfig, seed: int, model=None, demos=None,
               regime: Optional[RegimeSection] = None, target=None) -> RunResult:
    """Execute one closed-loop run as described by ``cfg``."""
    regime = regime or cfg.regime
    if model is None:
        model, demos, _ = build_model(cfg, seed)
    elif demos is None:
        demos = load_demos(cfg, seed)
    n = cfg.preprocessing.n
    z_star0, z0 = start_states(cfg, demos, regime)
    if target is None:
        target = nominal_target(model, z_star0, n)
    d = model.dim
    clf = clf_config(cfg, d) if cfg.clf.enabled else None
    l1 = l1_config(cfg, d) if cfg.l1.enabled else None
    sel = selector_config(cfg)
    band = dtw_params(cfg)
    dist = DisturbanceSet(regime.disturbances)
    if regime.kind == "perfect":
        gain = None if regime.state_gain is None else np.array(regime.state_gain, dtype=float)
        hold = None if regime.hold is None else tuple(regime.hold)
        return run_perfect(model, clf, l1, sel, dist, z0, n, target=target,
                           state_gain=gain, hold=hold, band=band)
    if regime.hold is not None or regime.state_gain is not None:
        raise ConfigError("hold and state_gain apply to the perfect regime only")
    p = regime.pid
    pid = PidGains(p.kp, p.ki, p.kd, p.windup)
    return run_imperfect(model, clf, l1, sel, dist, dist, pid, z0, n, target=target, band=band)


# -- certificate ----------------------------------------------------------------

def _task_sigma_bound(regime: RegimeSection, target_states, rho, n=2001):
    """Sup of ``||sigma||`` over the time grid and the tube around the target."""
    dist = DisturbanceSet(regime.disturbances)
    d = target_states.shape[1]
    scripted = max(float(np.linalg.norm(dist.value("task", t, d)))
                   for t in np.linspace(0.0, 1.0, n))
    gain_norm = 0.0
    if regime.state_gain is not None:
        gain_norm = float(np.linalg.norm(np.array(regime.state_gain, dtype=float), 2))
    reach = float(np.max(np.linalg.norm(target_states, axis=1))) + rho
    return scripted + gain_norm * reach, gain_norm


def certificate_inputs(cfg: ExperimentConfig, seed: int = 0, model=None, demos=None,
                       measured: Optional[dict] = None) -> CertificateInputs:
    """Resolve the certificate section, estimating ``auto`` entries.

    Estimation uses a disturbance-free calibration run of the configured
    stack (perfect regime): ``delta_f``, ``delta_nom`` and ``delta_sigma_hat``
    are the maxima of ``||f||``, ``||u_nom||`` and ``||sigma_hat||`` times
    ``certificate.safety``; ``delta_sigma_hat`` is never taken below
    ``delta_sigma`` since the estimate tracks ``sigma``. ``delta_sigma`` and
    ``l_sigma_z`` come from the perfect-regime disturbance specs.
    """
    cs = cfg.certificate
    dim = len(cfg.l1.a_s_diag)
    clf = ClfConfig(c=cfg.clf.c, p_matrix=None if cfg.clf.p_diag is None
                    else np.array(cfg.clf.p_diag, dtype=float), dim=dim)
    vals = {k: getattr(cs, k) for k in ("delta_sigma", "l_sigma_z", "delta_f", "delta_nom",
                                        "delta_sigma_hat", "delta_b", "v0")}
    if measured:
        vals.update(measured)
    need_sim = any(v == AUTO for v in vals.values())
    target = None
    if need_sim:
        if cfg.regime.kind != "perfect":
            raise ConfigError("automatic certificate estimation needs the perfect regime; "
                              "give explicit certificate values for imperfect runs")
        if model is None:
            model, demos, _ = build_model(cfg, seed)
        elif demos is None:
            demos = load_demos(cfg, seed)
        z_star0, z0 = start_states(cfg, demos)
        target = nominal_target(model, z_star0, cfg.preprocessing.n)
        if vals["v0"] == AUTO:
            vals["v0"] = clf_value(clf, z0 - z_star0)
    if vals["v0"] == AUTO:
        raise ConfigError("certificate.v0 is auto but no model is available")
    v0 = float(vals["v0"])
    rho = math.sqrt(v0 / clf.alpha1) * math.sqrt(clf.alpha2 / clf.alpha1) + cs.epsilon
    if vals["delta_sigma"] == AUTO or vals["l_sigma_z"] == AUTO:
        ds, lz = _task_sigma_bound(cfg.regime, target.states, rho)
        if vals["delta_sigma"] == AUTO:
            vals["delta_sigma"] = ds
        if vals["l_sigma_z"] == AUTO:
            vals["l_sigma_z"] = lz
    if any(vals[k] == AUTO for k in ("delta_f", "delta_nom", "delta_sigma_hat")):
        calm = dataclasses.replace(cfg.regime, disturbances=(), state_gain=None, hold=None)
        run = run_config(cfg, seed, model, demos, regime=calm, target=target)
        peak = {"delta_f": run.f_trace, "delta_nom": run.u_nom_trace,
                "delta_sigma_hat": run.sigma_hat_trace}
        for key, trace in peak.items():
            if vals[key] == AUTO:
                m = float(np.max(np.linalg.norm(trace, axis=1)))
                if key == "delta_sigma_hat":
                    m = max(m, float(vals["delta_sigma"]))
                vals[key] = cs.safety * m
    if vals["delta_b"] == AUTO:
        vals["delta_b"] = clf.delta_b(rho)
    ts = cfg.l1.t_sample if cfg.l1.t_sample is not None else grid_dt(cfg)
    return CertificateInputs(
        delta_sigma=float(vals["delta_sigma"]), l_sigma_z=float(vals["l_sigma_z"]),
        delta_f=float(vals["delta_f"]), delta_nom=float(vals["delta_nom"]),
        delta_sigma_hat=float(vals["delta_sigma_hat"]), delta_b=float(vals["delta_b"]),
        alpha1=clf.alpha1, alpha2=clf.alpha2, lam=clf.lam, v0=v0, epsilon=cs.epsilon,
        dim=dim, a_s_diag=tuple(float(a) for a in cfg.l1.a_s_diag), omega=cfg.l1.omega,
        t_sample=ts, t1_minus_t0=cs.t1_minus_t0)


def certificate_report(cfg: ExperimentConfig, seed: int = 0, model=None, demos=None):
    """``(inputs, report)`` for the configured certificate."""
    inp = certificate_inputs(cfg, seed, model, demos)
    return inp, certify(inp)


def format_certificate(inp: CertificateInputs, rep: CertificateReport) -> str:
    lines = [
        f"phi1      = {inp.phi1:.6g}",
        f"zeta1     = {rep.zeta1:.6g}",
        f"zeta2     = {rep.zeta2:.6g}",
        f"zeta3     = {rep.zeta3:.6g}",
        f"zeta4     = {rep.zeta4:.6g}",
        f"rho       = {rep.rho:.6g}",
        f"ts_max    = {rep.ts_max:.6g}",
        f"t_sample  = {inp.t_sample:.6g}",
        f"mu        = {rep.ultimate_bound_mu:.6g}",
        f"bandwidth condition: {'pass' if rep.condition_bandwidth_ok else 'FAIL'}",
        f"sampling condition:  {'pass' if rep.condition_ts_ok else 'FAIL'}",
    ]
    return "\n".join(lines)


# -- batch ----------------------------------------------------------------------

SUMMARY_COLUMNS = ("shape", "regime", "disturbance", "controller", "seed", "dtw_raw",
                   "dtw_normalized", "truncated")


@dataclass(frozen=True)
class ScoreRow:
    shape: str
    regime: str
    disturbance: str
    controller: str
    mean: float
    std: float
    count: int


@dataclass(frozen=True)
class ScoreTable:
    """Mean and standard deviation of normalized DTW across seeds.

    Rows are sorted by ``(shape, regime, disturbance, controller)``; the
    ``pooled`` shape aggregates every shape and seed of a cell.
    """

    rows: tuple

    def get(self, shape, disturbance, controller) -> ScoreRow:
        for r in self.rows:
            if (r.shape, r.disturbance, r.controller) == (shape, disturbance, controller):
                return r
        raise KeyError((shape, disturbance, controller))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["shape", "regime", "disturbance", "controller", "mean", "std",
                        "count"])
            for r in self.rows:
                w.writerow([r.shape, r.regime, r.disturbance, r.controller, f"{r.mean:.6f}",
                            f"{r.std:.6f}", r.count])

    def format(self) -> str:
        out = [f"{'shape':8s} {'disturbance':36s} {'controller':10s} score"]
        for r in self.rows:
            out.append(f"{r.shape:8s} {r.disturbance:36s} {r.controller:10s} "
                       f"{r.mean:.3f} +/- {r.std:.3f}")
        return "\n".join(out)


def score_table(summary) -> ScoreTable:
    groups = {}
    for rec in summary:
        if rec.get("error"):
            continue
        for shape in (rec["shape"], "pooled"):
            key = (shape, rec["regime"], rec["disturbance"], rec["controller"])
            groups.setdefault(key, []).append(rec["dtw_normalized"])
    rows = []
    for key in sorted(groups):
        vals = np.array(groups[key], dtype=float)
        rows.append(ScoreRow(*key, float(vals.mean()), float(vals.std()), int(vals.size)))
    return ScoreTable(tuple(rows))


def batch_cell(cfg: ExperimentConfig, shape: str, seed: int, batch: BatchSection):
    """All rows and controllers for one ``(shape, seed)``; one model fit."""
    cell_cfg = dataclasses.replace(cfg, shape=dataclasses.replace(
        cfg.shape, source="synthetic", name=shape, demo_dir=None))
    records = []
    try:
        model, demos, _ = build_model(cell_cfg, seed)
    except Exception as exc:  # recorded per row, the batch continues
        return [{"shape": shape, "seed": seed, "regime": r.kind, "disturbance": r.name,
                 "controller": c, "error": f"{type(exc).__name__}: {exc}"}
                for r in batch.rows for c in batch.controllers]
    band = dtw_params(cfg)
    for row in batch.rows:
        z_star0, _ = start_states(cell_cfg, demos, row)
        target = nominal_target(model, z_star0, cfg.preprocessing.n)
        results = {}
        errors = {}
        for ctrl in batch.controllers:
            try:
                results[ctrl] = run_config(with_controller(cell_cfg, ctrl), seed, model, demos,
                                           regime=row, target=target)
            except Exception as exc:
                errors[ctrl] = f"{type(exc).__name__}: {exc}"
        base = results.get("nominal")
        for ctrl in batch.controllers:
            rec = {"shape": shape, "seed": seed, "regime": row.kind, "disturbance": row.name,
                   "controller": ctrl}
            if ctrl in errors or base is None:
                rec["error"] = errors.get(ctrl, "baseline run failed")
            else:
                res = results[ctrl]
                try:
                    rec["dtw_normalized"] = normalized_dtw(res, base, band)
                except ZeroDivisionError as exc:
                    rec["error"] = f"{type(exc).__name__}: {exc}"
                rec["dtw_raw"] = res.dtw_raw
                rec["truncated"] = res.truncated
            records.append(rec)
    return records


def _cell_job(args):
    return batch_cell(*args)


def run_batch(cfg: ExperimentConfig, jobs: int = 1):
    """Run the batch matrix; returns ``(summary_records, ScoreTable)``.

    Records are sorted by key so the output does not depend on scheduling.
    """
    batch = cfg.batch or BatchSection()
    tasks = [(cfg, shape, seed, batch) for shape in batch.shapes for seed in cfg.seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(_cell_job, tasks))
    else:
        chunks = [_cell_job(t) for t in tasks]
    order = {name: i for i, name in enumerate(r.name for r in batch.rows)}
    ctrl_order = {c: i for i, c in enumerate(batch.controllers)}
    records = sorted((r for chunk in chunks for r in chunk),
                     key=lambda r: (r["shape"], order[r["disturbance"]], ctrl_order[r["controller"]],
                                    r["seed"]))
    return records, score_table(records)


def write_summary_csv(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(SUMMARY_COLUMNS) + ["error"])
        for r in records:
            if r.get("error"):
                w.writerow([r["shape"], r["regime"], r["disturbance"], r["controller"],
                            r["seed"], "", "", "", r["error"]])
            else:
                w.writerow([r["shape"], r["regime"], r["disturbance"], r["controller"],
                            r["seed"], repr(float(r["dtw_raw"])),
                            repr(float(r["dtw_normalized"])), str(bool(r["truncated"])), ""])


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
