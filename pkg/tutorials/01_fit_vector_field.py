"""
Learning a motion plan from demonstrations
==========================================

Generate noisy demonstrations of the ``sine`` shape, resample them onto a
common grid, fit the RBF vector field and roll it out from the mean start.
"""

import os
import sys

import numpy as np

from l1ds.field import fit_rbf, rollout, training_residual
from l1ds.shapes import generate_demos
from l1ds.trajectory import mean_start, resample_demo

n = 1000
demos = [resample_demo(d, n) for d in generate_demos("sine", n_demos=4, noise=0.02, seed=0)]
print(f"{len(demos)} demos, {demos[0].states.shape[0]} samples each")

# fit: 40 Gaussian centers placed by k-means, plus an affine term
model = fit_rbf(demos, num_centers=40, bandwidth=0.3, ridge=1e-6, seed=0)
print(f"training residual  {training_residual(model, demos):.2e}")
print(f"jacobian bound     {model.jacobian_bound:.2f}")

# the learned field is an autonomous system; its rollout is the target plan
z0 = mean_start(demos)
plan = rollout(model, z0, 1.0 / (n - 1), n - 1)
ends = np.array([d.states[-1] for d in demos])
print(f"plan ends at {plan.states[-1].round(3)}, demos end near {ends.mean(axis=0).round(3)}")

# more centers give a closer fit on this shape
for k in (10, 20, 40):
    r = training_residual(fit_rbf(demos, k, 0.3, 1e-6, seed=0), demos)
    print(f"  {k:3d} centers: residual {r:.2e}")

out = sys.argv[1] if len(sys.argv) > 1 else "tutorial_out"
os.makedirs(out, exist_ok=True)
model.save(os.path.join(out, "sine_model.json"))  # reload with VectorFieldModel.load
