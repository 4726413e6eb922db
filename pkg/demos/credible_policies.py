"""Policies instead of sequences: the planner reacts to every history, including splits.

A policy is credible when no coalition gains by leaving at any reachable
history.  One-period deviations suffice to find a gain whenever longer ones do.

Run: python3 demos/credible_policies.py
"""

from dyncore.credible_core import credible_core_check, one_deviation_check, theorem3_equivalence, uniform_policy
from dyncore.dynamics import DiscountSpec
from dyncore.families import FAMILIES

ds = DiscountSpec(0.8, 20)
policy = uniform_policy()

for name in ("damped_majority", "inflating_pair"):
    spec = FAMILIES[name]()
    v = credible_core_check(spec, policy, ds, 0.01, depth=2, h_check=20, resolution=0.1)
    print(f"{name:16s} equal split credible: {v.passed!s:5s} over {v.explored} histories "
          f"(worst slack {v.worst_slack:+.4f})")
    if v.counterexample:
        print("  first violation:", v.counterexample)

spec = FAMILIES["inflating_pair"]()
dev = one_deviation_check(spec, policy, None, 0b011, ds, 0.01, 0.1)
print(f"\nPlayers 0 and 1 leaving at the start gain {dev.gain:.4f} by taking {dev.deviation_allocation} once")

t3 = theorem3_equivalence(spec, policy, ds, 0.01, depth=2, h_check=20, stages=3, resolution=0.1)
print(f"one-period search profitable {t3.a_profitable}, three-period search profitable {t3.b_profitable}, "
      f"same first history {t3.same_first}")
