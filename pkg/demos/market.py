"""Firms that pool factor endowments and grow more productive when paid more.

Run: python3 demos/market.py
"""

import numpy as np

from dyncore.dynamics import simulate, uniform_schedule
from dyncore.game import format_coalition
from dyncore.market import is_superadditive, market_dynamic, random_market, stage_market_game

ms = random_market(seed=3)
g = stage_market_game(ms, np.ones(ms.n), 0b111)
print("Stage game at unit scales")
for T in range(1, 8):
    print(f"  {format_coalition(T):8s} {g.value(T):.4f}")
print("superadditive:", is_superadditive(g))

print("\nGrowth factor of a firm paid x inside a consortium of size k")
for k in (1, 2, 3):
    print(f"  k={k}: " + "  ".join(f"x={x}: {ms.growth(k, x):.4f}" for x in (0.0, 0.5, 1.0, 2.0)))

print("\nGrand-coalition worth under the equal split, period by period")
traj = simulate(market_dynamic(ms), uniform_schedule, length=8)
print("  " + "  ".join(f"{g.grand_worth:.3f}" for g in traj.games))
traj = simulate(market_dynamic(ms), uniform_schedule, length=8, deviations={3: 0b011})
print("with firms 0 and 1 splitting off in period 3:")
print("  " + "  ".join(f"{g.grand_worth:.3f}" for g in traj.games))
