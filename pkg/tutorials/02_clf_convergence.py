"""
Pulling a perturbed start back onto the plan
============================================

Start the perfect executor away from the plan and compare the bare learned
field with the min-norm CLF correction. ``V(e)`` should fall at least as fast
as ``exp(-c t)``.
"""

import numpy as np

from l1ds import experiments as ex
from l1ds.clf import ClfConfig, clf_value
from l1ds.config import ExperimentConfig
from l1ds.sim import SelectorConfig, nominal_target, run_perfect

cfg = ExperimentConfig.from_dict({"shape": {"name": "angle"}, "preprocessing": {"n": 1001}})
model, demos, _ = ex.build_model(cfg, 0)
z_star0, _ = ex.start_states(cfg, demos)
target = nominal_target(model, z_star0, 1001)
z0 = z_star0 + [0.25, -0.15]

open_loop = run_perfect(model, None, None, None, None, z0, 1001, target=target)
print(f"no correction : DTW {open_loop.dtw_raw:.3f}, final gap "
      f"{open_loop.tracking_error()[-1]:.3f}")

for c in (2.0, 10.0, 50.0):
    clf = ClfConfig(c=c)
    r = run_perfect(model, clf, None, SelectorConfig("time_indexed"), None, z0, 1001,
                    target=target)
    v = np.array([clf_value(clf, e) for e in r.executed.states - target.states])
    k = np.searchsorted(r.times, 0.1)
    print(f"c = {c:4.0f}     : DTW {r.dtw_raw:.3f}, V(0.1)/V(0) {v[k] / v[0]:.2e} "
          f"(exp(-c t) = {np.exp(-c * 0.1):.2e})")
