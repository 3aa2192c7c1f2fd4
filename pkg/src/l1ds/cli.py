"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 domain failure
(no warping path, failed certificate, truncated run, failed batch cell).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import experiments as ex
from .config import ConfigError, ExperimentConfig
from .disturbances import DisturbanceSet
from .dtw import DtwParams, NoWarpingPathError, dtw_distance, dtw_path
from .l1 import L1Config, L1ConfigError, SingularBandwidthError
from .shapes import SHAPES, generate_demos
from .sim import normalized_dtw
from .svg import write_run_svg
from .trajectory import InvalidDemonstrationError, read_trajectory_csv, save_demo_dir

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="experiment configuration (JSON)")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="run a single repetition seed")
    p.add_argument("--dry-run", action="store_true", help="validate inputs, write nothing")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for batch")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="l1ds", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("fit", parents=[common], help="fit the vector-field model")
    sub.add_parser("run", parents=[common], help="simulate one configured run")
    sub.add_parser("batch", parents=[common], help="run the benchmark matrix")
    sub.add_parser("certify", parents=[common], help="evaluate the robustness certificate")
    p_dtw = sub.add_parser("dtw", parents=[common], help="DTW distance between two CSV files")
    p_dtw.add_argument("file_a")
    p_dtw.add_argument("file_b")
    p_dtw.add_argument("--band", type=int, default=None, help="Sakoe-Chiba half-width")
    p_dtw.add_argument("--path", action="store_true", help="also print the warping path")
    p_gen = sub.add_parser("gen-demos", parents=[common], help="write synthetic demos")
    p_gen.add_argument("--shape", choices=SHAPES, help="shape (overrides shape.name)")
    p_gen.add_argument("--n-demos", type=int, default=None)
    p_gen.add_argument("--samples", type=int, default=1000)
    return parser


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seeds([args.seed])
    if args.out:
        cfg = dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, dir=args.out))
    return cfg


def _out_dir(cfg) -> str:
    return ex.ensure_dir(cfg.output.dir)


def cmd_fit(cfg: ExperimentConfig, args) -> int:
    reports = []
    fitted = []
    for seed in cfg.seeds:
        model, _, report = ex.build_model(cfg, seed)
        reports.append(report)
        fitted.append((seed, model))
        print(f"seed {seed}: residual {report['residual']:.3e}, "
              f"jacobian bound {report['jacobian_bound']:.3f}")
    if args.dry_run:
        return EXIT_OK
    out = _out_dir(cfg)
    for seed, model in fitted:
        model.save(os.path.join(out, f"model_seed{seed}.json"))
    with open(os.path.join(out, "fit_report.json"), "w", encoding="utf-8") as fh:
        json.dump(reports, fh, indent=2, sort_keys=True)
    return EXIT_OK


def _validate_run(cfg: ExperimentConfig) -> None:
    dim = len(cfg.l1.a_s_diag)
    if cfg.l1.enabled:
        ts = cfg.l1.t_sample if cfg.l1.t_sample is not None else ex.grid_dt(cfg)
        L1Config(np.array(cfg.l1.a_s_diag, dtype=float), cfg.l1.omega, ts).steps_per_sample(
            ex.grid_dt(cfg))
    for spec in cfg.regime.disturbances:
        if spec.dim != dim:
            raise ConfigError(f"disturbance amplitude has {spec.dim} axes for a {dim}-D task")


def cmd_run(cfg: ExperimentConfig, args) -> int:
    _validate_run(cfg)
    if args.dry_run:
        print("configuration valid")
        return EXIT_OK
    out = _out_dir(cfg)
    windows = DisturbanceSet(cfg.regime.disturbances).windows()
    if cfg.regime.hold is not None:
        windows = windows + [tuple(cfg.regime.hold)]
    records = []
    status = EXIT_OK
    ctrl = ex.controller_name(cfg)
    for seed in cfg.seeds:
        model, demos, _ = ex.build_model(cfg, seed)
        res = ex.run_config(cfg, seed, model, demos)
        base = res if ctrl == "nominal" else ex.run_config(
            ex.with_controller(cfg, "nominal"), seed, model, demos, target=res.target)
        try:
            norm = normalized_dtw(res, base, ex.dtw_params(cfg))
        except ZeroDivisionError:
            norm = float("nan")
        res.write_trace_csv(os.path.join(out, f"trace_seed{seed}.csv"))
        if cfg.output.svg:
            title = f"{cfg.shape.name} / {cfg.regime.name} / {ctrl} / seed {seed}"
            write_run_svg(os.path.join(out, f"run_seed{seed}.svg"), res, windows, title)
        records.append({"shape": cfg.shape.name, "regime": cfg.regime.kind,
                        "disturbance": cfg.regime.name, "controller": ctrl, "seed": seed,
                        "dtw_raw": res.dtw_raw, "dtw_normalized": norm,
                        "truncated": res.truncated})
        print(f"seed {seed}: DTW {res.dtw_raw:.6g}, normalized {norm:.4f}"
              + (" (truncated)" if res.truncated else ""))
        if res.truncated:
            status = EXIT_DOMAIN
    ex.write_summary_csv(os.path.join(out, "summary.csv"), records)
    return status


def cmd_batch(cfg: ExperimentConfig, args) -> int:
    if args.dry_run:
        batch = cfg.batch or ex.BatchSection()
        cells = len(batch.shapes) * len(batch.rows) * len(batch.controllers) * len(cfg.seeds)
        print(f"configuration valid: {cells} runs")
        return EXIT_OK
    records, table = ex.run_batch(cfg, jobs=max(1, args.jobs))
    out = _out_dir(cfg)
    ex.write_summary_csv(os.path.join(out, "summary.csv"), records)
    table.write_csv(os.path.join(out, "scores.csv"))
    print(table.format())
    failed = [r for r in records if r.get("error")]
    for r in failed:
        print(f"failed: {r['shape']} {r['disturbance']} {r['controller']} seed {r['seed']}: "
              f"{r['error']}", file=sys.stderr)
    return EXIT_DOMAIN if failed else EXIT_OK


def cmd_certify(cfg: ExperimentConfig, args) -> int:
    seed = cfg.seeds[0]
    try:
        inp, rep = ex.certificate_report(cfg, seed)
    except SingularBandwidthError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    print(ex.format_certificate(inp, rep))
    return EXIT_OK if rep.ok else EXIT_DOMAIN


def cmd_dtw(cfg: ExperimentConfig, args) -> int:
    a = read_trajectory_csv(args.file_a)
    b = read_trajectory_csv(args.file_b)
    if a.dim != b.dim:
        raise ConfigError(f"dimension mismatch: {a.dim} vs {b.dim}")
    band = args.band if args.band is not None else cfg.dtw.band
    params = DtwParams(band)
    print(f"{dtw_distance(a.states, b.states, params):.12g}")
    if args.path:
        for i, j in dtw_path(a.states, b.states, params):
            print(f"{i} {j}")
    return EXIT_OK


def cmd_gen_demos(cfg: ExperimentConfig, args) -> int:
    shape = args.shape or cfg.shape.name
    n_demos = args.n_demos or cfg.preprocessing.demo_count or 4
    seed = cfg.seeds[0]
    demos = generate_demos(shape, n_demos=n_demos, n_samples=args.samples,
                           amplitude=cfg.shape.amplitude, frequency=cfg.shape.frequency,
                           noise=cfg.shape.noise, decay=cfg.shape.decay, seed=seed)
    if args.dry_run:
        print(f"would write {len(demos)} demos of '{shape}'")
        return EXIT_OK
    paths = save_demo_dir(_out_dir(cfg), demos, prefix=shape)
    for p in paths:
        print(p)
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "run": cmd_run, "batch": cmd_batch, "certify": cmd_certify,
            "dtw": cmd_dtw, "gen-demos": cmd_gen_demos}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, InvalidDemonstrationError, L1ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoWarpingPathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
