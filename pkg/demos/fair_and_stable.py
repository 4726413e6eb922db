"""When worths react to allocations: an empty fair core beside a nonempty stable core,
and a certificate that builds a fair sequence from a convex split.

Run: python3 demos/fair_and_stable.py
"""

import numpy as np

from dyncore.dynamics import DiscountSpec, uniform_schedule
from dyncore.fair_core import (fair_core_membership, search_fair_sequences, synthesize_fair_sequence,
                               theorem1_certificate_search)
from dyncore.families import FAMILIES
from dyncore.stable_core import stable_core_membership

spec = FAMILIES["damped_majority"]()
print("Damped majority: a pair that splits off sees its worth shrink every period")
res = search_fair_sequences(spec, DiscountSpec.from_precision(0.99), 0.1, 4)
print(f"  0.1-fair periodic sequence of period <= 4 exists: {res.found} "
      f"(relaxation bound {res.relaxation_bound:+.4f})")
for delta in (0.5, 0.9, 0.99):
    rep = stable_core_membership(spec, uniform_schedule, DiscountSpec.from_precision(delta), 0.01)
    print(f"  equal split is 0.01-stable at delta {delta}: {rep.passed} (min slack {rep.min_slack:+.5f})")

print("\nRotating unit vectors: every allocation makes a different game")
ei = FAMILIES["ei_cycle"]()
cert = theorem1_certificate_search(ei, 1 / 3)
print("  certificate allocation:", np.round(cert.x, 4))
for point, weight in zip(cert.split.points, cert.split.weights):
    print(f"    play {point} with weight {weight:.4f}")
ds = DiscountSpec.from_precision(0.99)
seq = synthesize_fair_sequence(cert, ds)
slack = 2 * (1 - ds.delta) + 0.01
rep = fair_core_membership(ei, seq, ds, slack)
print(f"  synthesized sequence of {len(seq.prefix)} periods is {slack:.2f}-fair: {rep.passed}")
print("  majority game certificate:", theorem1_certificate_search(FAMILIES["constant_majority"]()))
