"""Rigid nanorotors with embedded spins.

Rotational dynamics of a rigid body carrying body-fixed spin angular
momentum: Euler equations with spin, the reduced pendulum model of rotations
about the symmetry axis, thermal ensembles, and NV spin dynamics near
rotational resonance.
"""

from .constants import DEFAULT, HBAR, KB, D_NV, PhysicalConstants
from .rotor import (
    InertiaSpec,
    InvalidGeometryError,
    Orientation,
    RotorClass,
    RotorState,
    classify_rotor,
    ellipsoid_inertia,
    euler_to_orientation,
    orientation_to_euler,
)
from .dynamics import (
    IntegrationError,
    IntegratorSettings,
    Trajectory,
    integrate_hard_magnet,
)
from .pendulum import (
    PendulumParams,
    effective_potential,
    h_eff_energy,
    integrate_pendulum,
    oblate_duality_map,
    tau_sym,
    thermal_bound,
    threshold_asym,
    threshold_sym,
    turning_point_singamma,
)
from .ensemble import ThermalSpec, ensemble_alignment, fit_gaussian_decay, sample_initial_states
from .spin import (
    EffectiveSpin,
    NVConfig,
    SpinAmplitudes,
    energy_gaps,
    evolve_meanfield,
    evolve_spin_parametric,
    rwa_effective_spin,
    rwa_validity,
    semiclassical_hamiltonian,
    time_avg_J2,
)

__version__ = "0.1.0"
