import csv
import json
import os

import numpy as np
import pytest

from l1ds.cli import main
from l1ds.dtw import dtw_distance

WORKED = {"clf": {"c": 2.0},
          "l1": {"omega": 20.0, "a_s_diag": [-10, -10], "t_sample": 0.001},
          "certificate": {"delta_sigma": 0.5, "l_sigma_z": 0.1, "delta_f": 2.0,
                          "delta_nom": 0.5, "delta_sigma_hat": 0.0, "delta_b": 2.0,
                          "v0": 0.25, "epsilon": 0.5, "t1_minus_t0": 0.3}}


def _write(path, data):
    with open(path, "w") as fh:
        json.dump(data, fh)
    return str(path)


def _merge(base, **sections):
    out = json.loads(json.dumps(base))
    for key, val in sections.items():
        out.setdefault(key, {}).update(val)
    return out


def _read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def _printed(out):
    return dict(line.split("=", 1) for line in out.splitlines() if "=" in line)


# -- gen-demos / fit -----------------------------------------------------------------

def test_gen_demos_then_fit_line(tmp_path, capsys):
    demo_dir = tmp_path / "demos"
    assert main(["gen-demos", "--shape", "line", "--out", str(demo_dir)]) == 0
    assert sorted(os.listdir(demo_dir)) == [f"line_{i:02d}.csv" for i in range(4)]
    cfg = _write(tmp_path / "cfg.json", {"shape": {"source": "dir", "demo_dir": str(demo_dir)}})
    out = tmp_path / "fit"
    assert main(["fit", "--config", cfg, "--out", str(out)]) == 0
    report = json.load(open(out / "fit_report.json"))
    assert report[0]["residual"] < 1e-3
    assert (out / "model_seed0.json").exists()


def test_fit_seeds_differ_but_agree(tmp_path):
    cfg = _write(tmp_path / "cfg.json", {"shape": {"name": "sine"}, "seeds": [1, 2]})
    assert main(["fit", "--config", cfg, "--out", str(tmp_path)]) == 0
    r1, r2 = (x["residual"] for x in json.load(open(tmp_path / "fit_report.json")))
    assert max(r1, r2) <= 2.0 * min(r1, r2)
    c1 = np.array(json.load(open(tmp_path / "model_seed1.json"))["centers"])
    c2 = np.array(json.load(open(tmp_path / "model_seed2.json"))["centers"])
    assert not np.allclose(c1, c2)


def test_fit_empty_demo_dir(tmp_path, capsys):
    empty = tmp_path / "nothing_here"
    empty.mkdir()
    cfg = _write(tmp_path / "cfg.json", {"shape": {"source": "dir", "demo_dir": str(empty)}})
    assert main(["fit", "--config", cfg, "--out", str(tmp_path / "o")]) != 0
    assert str(empty) in capsys.readouterr().err


def test_bad_config_key_exit_1(tmp_path, capsys):
    cfg = _write(tmp_path / "cfg.json", {"clf": {"gain": 3}})
    assert main(["run", "--config", cfg, "--dry-run"]) == 1
    assert "clf.gain" in capsys.readouterr().err


def test_sigma_in_imperfect_regime_rejected(tmp_path, capsys):
    cfg = _write(tmp_path / "cfg.json", {"regime": {"kind": "imperfect", "disturbances": [
        {"kind": "constant", "channel": "task", "amplitude": [0.5, 0.0]}]}})
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "perfect regime" in capsys.readouterr().err


# -- run ----------------------------------------------------------------------------

def test_run_dry_run_writes_nothing(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--dry-run", "--out", str(out)]) == 0
    assert not out.exists()


def test_clean_run_outputs(tmp_path):
    cfg = _write(tmp_path / "cfg.json", {"preprocessing": {"n": 501}})
    out = tmp_path / "o"
    assert main(["run", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "run_seed0.svg").exists()
    trace = _read_csv(out / "trace_seed0.csv")
    assert len(trace) == 501
    summary = _read_csv(out / "summary.csv")
    z = np.array([[float(r["zstar1"]), float(r["zstar2"])] for r in trace])
    scale = dtw_distance(z, z.mean(axis=0, keepdims=True))  # DTW to the centroid
    assert float(summary[0]["dtw_raw"]) < 1e-6 * scale


def test_step_disturbed_pair(tmp_path):
    step = {"kind": "step", "channel": "task", "amplitude": [1.5, -1.5], "start": 0.3}
    base = {"preprocessing": {"n": 501}, "regime": {"disturbances": [step]}}
    scores = {}
    for ctrl, l1_on in (("clf", False), ("l1", True)):
        cfg = _write(tmp_path / f"{ctrl}.json", _merge(base, l1={"enabled": l1_on}))
        out = tmp_path / ctrl
        assert main(["run", "--config", cfg, "--out", str(out)]) == 0
        assert (out / "run_seed0.svg").exists()
        row = _read_csv(out / "summary.csv")[0]
        assert row["controller"] == ctrl
        scores[ctrl] = float(row["dtw_normalized"])
    assert scores["l1"] < scores["clf"] < 1.0


# -- batch --------------------------------------------------------------------------

def test_batch_nominal_only(tmp_path, capsys):
    cfg = _write(tmp_path / "cfg.json", {
        "preprocessing": {"n": 201}, "seeds": [0, 1, 2],
        "batch": {"shapes": ["sine"], "controllers": ["nominal"],
                  "rows": [{"kind": "perfect", "name": "step", "disturbances": [
                      {"kind": "step", "channel": "task", "amplitude": [1, 1],
                       "start": 0.5}]}]}})
    assert main(["batch", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "scores.csv")
    assert {r["shape"] for r in rows} == {"sine", "pooled"}
    for r in rows:
        assert float(r["mean"]) == 1.0 and float(r["std"]) == 0.0 and r["count"] == "3"
    assert len(_read_csv(tmp_path / "summary.csv")) == 3


def test_batch_dry_run(tmp_path, capsys):
    cfg = _write(tmp_path / "cfg.json", {"batch": {}, "seeds": [0, 1]})
    assert main(["batch", "--config", cfg, "--dry-run", "--out", str(tmp_path / "o")]) == 0
    assert "120 runs" in capsys.readouterr().out
    assert not (tmp_path / "o").exists()


# -- certify ------------------------------------------------------------------------

def test_certify_worked_example(tmp_path, capsys):
    assert main(["certify", "--config", _write(tmp_path / "c.json", WORKED)]) == 0
    vals = _printed(capsys.readouterr().out)
    assert float(vals["ts_max    "]) == pytest.approx(0.0379, abs=5e-5)
    assert float(vals["zeta3     "]) == pytest.approx(10.0)


def test_certify_zero_uncertainty(tmp_path, capsys):
    zero = _merge(WORKED, certificate={"delta_sigma": 0.0, "l_sigma_z": 0.0,
                                       "delta_sigma_hat": 0.0})
    assert main(["certify", "--config", _write(tmp_path / "c.json", zero)]) == 0
    vals = _printed(capsys.readouterr().out)
    for k in ("zeta1", "zeta2", "zeta3", "zeta4"):
        assert float(vals[f"{k:10s}"]) == 0.0


def test_certify_sample_time_too_long(tmp_path, capsys):
    slow = _merge(WORKED, l1={"t_sample": 0.05})
    assert main(["certify", "--config", _write(tmp_path / "c.json", slow)]) == 2
    assert "sampling condition:  FAIL" in capsys.readouterr().out


def test_certify_singular_bandwidth(tmp_path, capsys):
    sing = _merge(WORKED, l1={"omega": 2.0})  # lambda = c / 2 = 1
    assert main(["certify", "--config", _write(tmp_path / "c.json", sing)]) == 2
    assert "omega" in capsys.readouterr().err


# -- dtw ----------------------------------------------------------------------------

def _scalar_csv(path, xs):
    with open(path, "w") as fh:
        fh.write("t,x1\n")
        for i, x in enumerate(xs):
            fh.write(f"{i / max(1, len(xs) - 1)},{x}\n")
    return str(path)


def test_dtw_command(tmp_path, capsys):
    a = _scalar_csv(tmp_path / "a.csv", [0, 1, 2])
    b = _scalar_csv(tmp_path / "b.csv", [0, 2])
    assert main(["dtw", a, a]) == 0
    assert float(capsys.readouterr().out) == 0.0
    assert main(["dtw", a, b, "--path"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert float(lines[0]) == 1.0
    assert lines[1] == "0 0" and lines[-1] == "2 1"


def test_dtw_band_too_small(tmp_path, capsys):
    a = _scalar_csv(tmp_path / "a.csv", [0, 1, 2, 3])
    b = _scalar_csv(tmp_path / "b.csv", [0, 2])
    assert main(["dtw", a, b, "--band", "1"]) == 2


def test_dtw_dimension_mismatch(tmp_path, capsys):
    a = _scalar_csv(tmp_path / "a.csv", [0, 1, 2])
    b = tmp_path / "b.csv"
    b.write_text("t,x1,x2\n0,0,0\n1,1,1\n")
    assert main(["dtw", a, str(b)]) == 1
    assert "dimension" in capsys.readouterr().err


def test_unknown_command_exit_1(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["explode"])
    assert exc.value.code == 1
