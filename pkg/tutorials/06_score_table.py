"""
A small benchmark table
=======================

Run two shapes through the five disturbance rows with each controller stack
and print normalized DTW scores (1.0 is the uncorrected learned field).
"""

import os
import sys

from l1ds import experiments as ex
from l1ds.config import ExperimentConfig

out = sys.argv[1] if len(sys.argv) > 1 else "tutorial_out"
os.makedirs(out, exist_ok=True)

cfg = ExperimentConfig.from_dict({"preprocessing": {"n": 501}, "seeds": [0, 1],
                                  "batch": {"shapes": ["line", "sine"]}})
records, table = ex.run_batch(cfg)
print(table.format())
ex.write_summary_csv(os.path.join(out, "summary.csv"), records)
table.write_csv(os.path.join(out, "scores.csv"))
cfg.save(os.path.join(out, "config.json"))  # rerun with: l1ds batch --config config.json
