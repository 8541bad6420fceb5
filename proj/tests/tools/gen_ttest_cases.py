#!/usr/bin/env python3
"""Generate frozen paired t-test reference cases with scipy.

Writes tests/data/ttest_cases.json: 50 random difference vectors of
varying length plus the worked five-point example, each with the
reference t statistic and two-sided p value from scipy.stats.
"""
import json
import random

from scipy import stats

random.seed(20250809)

cases = []

# Worked example: d = [0.1, 0.2, -0.05, 0.15, 0.1] as paired samples a - b.
worked = [0.1, 0.2, -0.05, 0.15, 0.1]
t, p = stats.ttest_rel(worked, [0.0] * len(worked))
cases.append({"diffs": worked, "t": float(t), "p": float(p)})

for _ in range(50):
    n = random.randint(3, 40)
    scale = random.choice([0.01, 0.1, 1.0, 10.0])
    shift = random.uniform(-0.5, 0.5) * scale
    diffs = [round(random.gauss(shift, scale), 12) for _ in range(n)]
    t, p = stats.ttest_rel(diffs, [0.0] * n)
    cases.append({"diffs": diffs, "t": float(t), "p": float(p)})

with open("tests/data/ttest_cases.json", "w") as fh:
    json.dump({"version": 1, "cases": cases}, fh, indent=1)
print(f"wrote {len(cases)} cases")
