import re
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from l1ds.config import (AUTO, BatchSection, ConfigError, ExperimentConfig, table_rows)
from l1ds.shapes import SHAPES

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
pos = st.floats(0.01, 100, allow_nan=False)
pair = st.lists(finite, min_size=2, max_size=2)


@st.composite
def disturbance(draw, channel):
    kind = draw(st.sampled_from(["constant", "step", "pulse_train", "multi_sine"]))
    d = {"kind": kind, "channel": channel, "amplitude": draw(pair)}
    if kind == "step":
        d["start"] = draw(st.floats(0, 1))
    if kind == "pulse_train":
        a = draw(st.floats(0, 0.5))
        d["windows"] = [[a, a + draw(st.floats(0.01, 0.5))]]
    return d


@st.composite
def config_dicts(draw):
    kind = draw(st.sampled_from(["perfect", "imperfect"]))
    channels = ["task"] if kind == "perfect" else ["matched", "unmatched"]
    regime = {"kind": kind, "name": draw(st.sampled_from(["a", "row_1"])),
              "disturbances": [draw(disturbance(draw(st.sampled_from(channels))))
                               for _ in range(draw(st.integers(0, 2)))],
              "pid": {"kp": draw(pos), "ki": draw(pos), "kd": draw(pos)}}
    if kind == "perfect" and draw(st.booleans()):
        regime["hold"] = [0.4, 0.45]
        regime["z0_offset"] = draw(pair)
    return {
        "shape": {"name": draw(st.sampled_from(SHAPES)), "noise": draw(st.floats(0, 0.1))},
        "preprocessing": {"n": draw(st.integers(2, 3000))},
        "clf": {"c": draw(pos), "enabled": draw(st.booleans())},
        "l1": {"omega": draw(pos), "a_s_diag": [-draw(pos), -draw(pos)],
               "t_sample": draw(st.none() | pos)},
        "selector": {"mode": draw(st.sampled_from(["dtw", "time_indexed"]))},
        "dtw": {"band": draw(st.none() | st.integers(0, 50))},
        "certificate": {"delta_sigma": draw(st.just(AUTO) | pos), "epsilon": draw(pos)},
        "regime": regime,
        "seeds": draw(st.lists(st.integers(0, 1000), min_size=1, max_size=4)),
    }


@settings(max_examples=60, deadline=None)
@given(config_dicts())
def test_round_trip(data):
    cfg = ExperimentConfig.from_dict(data)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    json.loads(cfg.to_json())


def test_round_trip_with_batch(tmp_path):
    cfg = ExperimentConfig(batch=BatchSection())
    path = tmp_path / "cfg.json"
    cfg.save(path)
    assert ExperimentConfig.load(path) == cfg


@pytest.mark.parametrize("data,key", [
    ({"clff": {}}, "clff"),
    ({"clf": {"cc": 1}}, "clf.cc"),
    ({"regime": {"pid": {"kpp": 1}}}, "regime.pid.kpp"),
    ({"batch": {"rows": [{"knd": "perfect"}]}}, "batch.rows[0].knd"),
])
def test_unknown_key_is_named(data, key):
    with pytest.raises(ConfigError, match=re.escape(f"'{key}'")):
        ExperimentConfig.from_dict(data)


@pytest.mark.parametrize("data", [
    {"regime": {"kind": "perfect", "disturbances": [
        {"kind": "constant", "channel": "matched", "amplitude": [1, 0]}]}},
    {"regime": {"kind": "imperfect", "disturbances": [
        {"kind": "constant", "channel": "task", "amplitude": [1, 0]}]}},
    {"regime": {"kind": "sideways"}},
    {"regime": {"hold": [0.5, 0.4]}},
    {"shape": {"name": "spiral"}},
    {"preprocessing": {"n": 1}},
    {"clf": {"c": -1}},
    {"l1": {"omega": "fast"}},
    {"seeds": []},
    {"seeds": 3},
    {"batch": {"controllers": ["clf", "l1"]}},
])
def test_invalid_values(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_invalid_json():
    with pytest.raises(ConfigError, match="JSON"):
        ExperimentConfig.from_json("{not json")


def test_table_rows():
    rows = table_rows()
    assert len(rows) == 5
    assert len({r.name for r in rows}) == 5
    assert rows[0].kind == "perfect"
    assert all(r.kind == "imperfect" for r in rows[1:])
    channels = [{s.channel for s in r.disturbances} for r in rows]
    assert channels == [{"task"}, {"matched"}, {"unmatched"}, {"unmatched"},
                        {"matched", "unmatched"}]


def test_with_seeds():
    cfg = ExperimentConfig().with_seeds([3, 4])
    assert cfg.seeds == (3, 4)
    assert ExperimentConfig().seeds == (0,)
