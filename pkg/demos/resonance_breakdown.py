"""Rotation on resonance with the NV splitting, prolate against oblate.

In the mean-field model the spin follows the instantaneous rotation and acts
back on it.  For the prolate 6/6/7 nm rotor started in |+1>, the spin keeps
the rotation stable below resonance.  At J = I D it depolarizes and the
rotation is left nearly neutral.  Past resonance the rotor flips within a
few microseconds.  The oblate rotor started in |-1> stays aligned
throughout.  Prints time_avg_J2 for a short J/(I D) scan of each.

Run:  python demos/resonance_breakdown.py     (a few minutes)
"""

import numpy as np

from spinrotor.rotor import ellipsoid_inertia
from spinrotor.spin import SpinAmplitudes, resonance_scan

T0 = 50e-6
ratios = np.array([0.9, 1.0, 1.1])
cases = {
    "prolate 6/6/7 nm, |+1>": (ellipsoid_inertia(6e-9, 6e-9, 7e-9), SpinAmplitudes.basis(1)),
    "oblate 6.81/6.81/5.44 nm, |-1>": (ellipsoid_inertia(6.81e-9, 6.81e-9, 5.44e-9), SpinAmplitudes.basis(-1)),
}
for name, (inertia, psi0) in cases.items():
    rows = resonance_scan(inertia, psi0, ratios, T0)
    print(name)
    for row in rows:
        print(f"  J/(I D) = {row['J_over_ID']:.2f}   time-averaged J2/J = {row['avgJ2_over_J']:.6f}")
