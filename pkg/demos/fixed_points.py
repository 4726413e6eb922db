"""Aggregate dynamics: worths that depend only on what a coalition received last period.

Iterating a coalition's map from its share converges to a limit; the limits
define a static game whose least core predicts whether stable sequences exist.

Run: python3 demos/fixed_points.py
"""

import numpy as np

from dyncore.dynamics import DiscountSpec, present_value
from dyncore.families import FAMILIES
from dyncore.stable_core import fixed_point, induced_game, theorem2_experiment, window_find

spec = FAMILIES["inflating_aggregate"](seed=0)
ad = spec.aggregate
print("Limits of a pair's worth from several starting shares")
for c in (0.0, 0.3, 0.6, 0.9):
    rep = fixed_point(ad, 0b011, c, 1e-4)
    print(f"  from {c:.1f}: limit {rep.limit:.6f} after {rep.iterations} steps, "
          f"within 1e-4 everywhere after {rep.certified_m}")

x = np.full(3, 1 / 3)
print("\nGame of limits at the equal split:", np.round(induced_game(ad, x).game.worth, 4))

ds = DiscountSpec.from_precision(0.9)
for family in ("damped_aggregate", "inflating_aggregate"):
    v = theorem2_experiment(FAMILIES[family](seed=0), ds, 0.05)
    print(f"{family:20s} limit-game core nonempty: {v.a!s:5s}  stable sequence found: {v.b!s:5s}  "
          f"consistent: {v.consistent}")

print("\nA window where a sequence is near its largest accumulation point and stays below it on average")
t = np.arange(1, 4001)
a = np.where(t % 2 == 0, 0.8, 0.3) + np.sin(t) / t
h = window_find(a, 0.99, 0.8, 0.05)
tail = present_value(a[h - 1:], DiscountSpec(0.99, len(a) - h + 1))
print(f"  first such period: {h}, value {a[h - 1]:.4f}, discounted average from there {tail:.4f}")
