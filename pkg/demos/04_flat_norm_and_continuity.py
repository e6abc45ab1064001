"""Measure how far apart two defect configurations are.

The flat norm of a difference of point sets charges either moving mass or
deleting it, whichever is cheaper. Moving the core of a smoothed vortex by
delta should therefore change the averaged defect set by about delta.
"""
from defectchains.field import DEFAULT_CENTER, cored_vortex
from defectchains.flatnorm import flat_norm, flat_norm_points
from defectchains.reports import continuity_report
from defectchains.singular import singular_set

print("two opposite points 0.3 apart:", flat_norm_points([[0, 0], [0.3, 0]], [1, -1]))
print("two opposite points 5 apart:  ", flat_norm_points([[0, 0], [5, 0]], [1, -1]))

u0 = cored_vortex(0.2, 32)
for delta in (0.2, 0.1, 0.05):
    u1 = cored_vortex(0.2, 32, center=(DEFAULT_CENTER[0] + delta, DEFAULT_CENTER[1]))
    D = singular_set(u1, y=[0, 0]).chain - singular_set(u0, y=[0, 0]).chain
    single = flat_norm(D).value if not D.is_zero() else 0.0
    rep = continuity_report(u0, u1, 60, seed=1)
    print(f"delta {delta:4.2f}: flat norm at y=0 {float(single):.3f}, averaged over y {rep.flat_integral:.3f} "
          f"(ratio to delta {rep.flat_integral / delta:.2f})")
