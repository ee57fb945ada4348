"""Alignment of a displaced thermal ensemble for S2 = +hbar, 0 and -hbar.

A single NV spin (S2 = +hbar) keeps a 2 mK ensemble aligned with the
transverse axis n2, no spin gives the Gaussian decay with time constant
tau_sym, and S2 = -hbar flips the alignment early.  A 400-member ensemble
runs in well under a minute; the acceptance suite uses 2000.

Run:  python demos/thermal_triptych.py
"""

import numpy as np

from spinrotor.constants import HBAR
from spinrotor.ensemble import ThermalSpec, ensemble_alignment, fit_gaussian_decay
from spinrotor.pendulum import tau_sym
from spinrotor.rotor import ellipsoid_inertia

inertia = ellipsoid_inertia(10e-9, 10e-9, 11e-9)
J = inertia.I2 * 2 * np.pi * 23.7e6
T = 2e-3
tau = tau_sym(inertia.I1, inertia.I3, T)
spec = ThermalSpec(T, J, inertia, seed=1, n_samples=400)

runs = {s: ensemble_alignment(spec, [0, s * HBAR, 0], (0, 3 * tau), n_times=31) for s in (1, 0, -1)}
print(f"tau_sym = {tau * 1e6:.2f} us\n")
print(f"{'t / tau':>8} {'S2=+hbar':>10} {'S2=0':>10} {'S2=-hbar':>10}")
for k in range(0, 31, 3):
    print(f"{runs[0].times[k] / tau:>8.2f}" + "".join(f"{runs[s].mean[k]:>10.3f}" for s in (1, 0, -1)))
fit = fit_gaussian_decay(runs[0].times, runs[0].mean)
print(f"\nGaussian fit of the S2=0 curve: tau = {fit.tau / tau:.3f} tau_sym")
