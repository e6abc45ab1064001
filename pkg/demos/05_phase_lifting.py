"""Unwrap the phase of a field with vortices.

Away from its defects a circle-valued field has a continuous phase, but the
phase must jump by multiples of 2 pi across some cut joining the defects or
running to the boundary. We build a short cut, lift the phase and compare the
total variation of the phase with that of the field.
"""
import numpy as np

from defectchains.field import defect_free, vortex_pair
from defectchains.lifting import lift_circle_field

for name, u in (("vortex pair", vortex_pair(64)), ("defect free", defect_free(64))):
    L = lift_circle_field(u)
    err = np.abs(np.c_[np.cos(L.theta), np.sin(L.theta)] - u.values).max()
    v = L.variation
    print(f"{name}: {len(L.jumps)} cut edges, cut length {v['cut_mass']:.3f}, reconstruction error {err:.1e}")
    print(f"  |D theta| = {v['absolutely_continuous']:.3f} + {v['jump']:.3f} jump, |Du| = {v['du']:.3f}, "
          f"ratio {v['ratio']:.3f}")

short = lift_circle_field(vortex_pair(64)).variation["cut_mass"]
long = lift_circle_field(vortex_pair(64), minimize_cut=False).variation["cut_mass"]
print(f"minimizing the cut shortens it from {long:.3f} to {short:.3f}")
