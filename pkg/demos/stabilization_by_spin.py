"""A few body-fixed spins trap the rotation angle of a prolate rotor.

A 10/10/11 nm ellipsoid spins about a transverse axis.  Without spin the
angle gamma about the symmetry axis drifts freely once J3 is nonzero; with
S2 above the symmetric threshold it librates about pi/2, and with S2 of the
opposite sign it is pushed away.  Each case is run with the full Euler
equations and with the reduced pendulum, and the minimum of sin(gamma) is
printed next to the closed-form turning point.

Run:  python demos/stabilization_by_spin.py
"""

import numpy as np

from spinrotor.constants import HBAR
from spinrotor.dynamics import IntegratorSettings, integrate_hard_magnet
from spinrotor.pendulum import (
    PendulumParams,
    integrate_pendulum,
    small_oscillation_frequency,
    threshold_sym,
    turning_point_singamma,
)
from spinrotor.rotor import Orientation, RotorState, ellipsoid_inertia

inertia = ellipsoid_inertia(10e-9, 10e-9, 11e-9)
J = inertia.I2 * 2 * np.pi * 23.7e6
p0 = 1e-3 * J
thr = threshold_sym(p0, inertia.I1, inertia.I3, J)
print(f"rotor: {inertia.rotor_class.value}, J/I = 2pi x 23.7 MHz")
print(f"J3(0)/J = 1e-3 -> trapping threshold S2 = {thr / HBAR:.3g} hbar\n")

print(f"{'S2 / threshold':>15} {'min sin(gamma) full':>20} {'pendulum':>10} {'closed form':>12}")
for factor in (2.0, 1.0, 0.5, -1.0):
    S2 = factor * thr
    prm = PendulumParams.from_inertia(inertia, S2, J)
    w = small_oscillation_frequency(PendulumParams.from_inertia(inertia, abs(S2), J))
    horizon = 20 * 2 * np.pi / w
    s = IntegratorSettings(sample_interval=horizon / 4000)
    full = integrate_hard_magnet(RotorState(Orientation.identity(), [0, np.sqrt(J * J - p0 * p0), p0]),
                                 [0, S2, 0], inertia, (0, horizon), s, track_orientation=False)
    pend = integrate_pendulum(np.pi / 2, p0, prm, (0, horizon), s)
    tp = turning_point_singamma(p0, prm)
    closed = f"{tp.singamma_min:.4f}" if tp.trapped else "untrapped"
    print(f"{factor:>15.1f} {np.sin(full.gamma).min():>20.4f} {np.sin(pend.gamma).min():>10.4f} {closed:>12}")
