"""Defect lines in three dimensions.

For a circle-valued field on a box the singular set is a 1-chain. It has no
boundary inside the box, so it is either a closed loop or runs from face to
face. Both shapes are exported as obj polylines.
"""
from pathlib import Path

from defectchains.field import line_defect_3d, smooth_noise, vortex_ring
from defectchains.io import defect_polylines, export_defects
from defectchains.singular import singular_set

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)

for name, u in (("straight line", line_defect_3d(16)), ("ring", vortex_ring(16)),
                ("noise", smooth_noise((16, 16, 16), rng=3))):
    S = singular_set(u)
    lines = defect_polylines(S)
    closed = sum(len(p) > 2 and (p[0] == p[-1]).all() for p in lines)
    print(f"{name}: {len(S.chain)} dual edges in {len(lines)} polylines ({closed} closed), "
          f"interior boundary empty: {S.interior_boundary().is_zero()}")
    export_defects(S, "obj", out / f"{name.replace(' ', '_')}.obj")
print("obj files in", out)
