"""
Running the plan on a PID-tracked double integrator
===================================================

The imperfect regime feeds the task-level reference to a per-axis PID loop
driving a double integrator at ten times the outer rate. Matched
disturbances enter the velocity equation, unmatched ones the position.
"""

from l1ds import experiments as ex
from l1ds.clf import ClfConfig
from l1ds.config import ExperimentConfig
from l1ds.disturbances import DisturbanceSpec
from l1ds.l1 import L1Config
from l1ds.sim import PidGains, dtw_scale, nominal_target, run_imperfect

cfg = ExperimentConfig.from_dict({"shape": {"name": "sine"}, "preprocessing": {"n": 1001}})
model, demos, _ = ex.build_model(cfg, 0)
z_star0, _ = ex.start_states(cfg, demos)
target = nominal_target(model, z_star0, 1001)
scale = dtw_scale(target)
clf, l1 = ClfConfig(), L1Config([-10.0, -10.0], 30.0, 1e-3)

for gains in (PidGains(100, 25, 20), PidGains(400, 100, 40), PidGains()):
    r = run_imperfect(model, None, None, None, None, None, gains, z_star0, 1001, target=target)
    print(f"no correction, kp {gains.kp:6.0f}: DTW / scale {r.dtw_raw / scale:.4f}")

cases = {
    "matched multi-sine": ([DisturbanceSpec("multi_sine", "matched", (40.0, -40.0))], None),
    "unmatched constant": (None, [DisturbanceSpec("constant", "unmatched", (0.5, -0.5))]),
}
for name, (dm, dum) in cases.items():
    scores = []
    for c, a in ((None, None), (clf, None), (clf, l1)):
        scores.append(run_imperfect(model, c, a, None, dm, dum, PidGains(), z_star0, 1001,
                                    target=target))
    base = scores[0].dtw_raw
    print(f"{name:20s} nominal 1.000  CLF {scores[1].dtw_raw / base:.3f}  "
          f"L1 {scores[2].dtw_raw / base:.3f}")
