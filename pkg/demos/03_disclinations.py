"""Half-charge disclinations of a nematic director field.

A director field only knows its axis, so rotating it by half a turn around a
point is already a defect. Such defects carry a Z/2 class. We build a pair,
embed the directors as traceless Q-tensors and extract the defect chain.
"""
import numpy as np

from defectchains.field import DEFAULT_PAIR, disclination_half
from defectchains.singular import singular_set
from defectchains.target import RP2Q

u = disclination_half(64)
print("values live in R^5; distance from the target to the exceptional set:", round(RP2Q.delta0, 6))
S = singular_set(u)
print("coefficient group:", S.chain.group)
for x, (cid, g) in zip(S.locations(), S.chain.items()):
    print(f"  defect at ({x[0]:+.3f}, {x[1]:+.3f}) class {g.coords[0]}")
print("seeded at", DEFAULT_PAIR)

# any offset smaller than that distance gives the same cells
rng = np.random.default_rng(0)
same = 0
for _ in range(20):
    y = rng.normal(size=5)
    y *= 0.8 * RP2Q.delta0 * rng.random() / np.linalg.norm(y)
    same += singular_set(u, y=y).same_cells(S)
print(f"identical at {same}/20 small offsets")
