"""Static games first: least cores, then sequences of allocations judged by discounted sums.

Run: python3 demos/static_cores.py
"""

import numpy as np

from dyncore.dynamics import AllocationSequence, DiscountSpec, uniform_schedule
from dyncore.fair_core import discounted_average, efficiency_check, fair_core_membership
from dyncore.families import FAMILIES, load_spec
from dyncore.game import format_coalition, least_core


def show_least_core(name: str) -> None:
    g = load_spec(name).initial
    rep = least_core(g)
    binding = ", ".join(format_coalition(T) for T in rep.binding)
    print(f"{name:18s} epsilon* = {rep.epsilon_star:.4f}  witness = {np.round(rep.witness, 4)}  binding: {binding}")


print("Least cores of three small games")
for name in ("majority3.json", "u1.json", "additive3.json"):
    show_least_core(name)

# Two games with empty cores can still be shared fairly over time when they alternate.
print("\nAlternating between two games, paying each its own allocation in turn")
seq = AllocationSequence(cycle=([1, 1.5, 1.5, 0], [0, 1.5, 1.5, 1]))
ds = DiscountSpec.from_precision(0.99, 1e-4, 3.0)
for name in ("alternating_u1u2_listed.json", "alternating_u1u2.json"):
    spec = load_spec(name)
    rep = fair_core_membership(spec, seq, ds, 0.05)
    print(f"{name:30s} fair at eps 0.05: {rep.passed}  worst coalition {format_coalition(rep.worst.coalition)} "
          f"slack {rep.worst.slack:+.4f}")
print("discounted average allocation:", np.round(discounted_average(load_spec("alternating_u1u2_listed.json"),
                                                                      seq, ds), 4))

# Fairness alone does not force efficiency: paying everything in the first period is fair but wasteful.
print("\nFair is not the same as efficient")
spec = FAMILIES["efficiency_example"]()
front = AllocationSequence(prefix=([1, 0, 0],), cycle=([0, 0, 0],))
for label, schedule in (("front-loaded", front), ("equal split", uniform_schedule)):
    fair = fair_core_membership(spec, schedule, ds, 0.0).passed
    eff = efficiency_check(spec, schedule, ds)
    print(f"{label:13s} fair {fair!s:5s}  efficient {eff.efficient!s:5s}  "
          f"achieved {eff.achieved:.4f} of {eff.optimum:.4f}")
