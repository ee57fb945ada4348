"""Physical constants used throughout the package (SI units)."""

from dataclasses import dataclass

import numpy as np
from scipy import constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    """Container for the handful of constants the simulator needs.

    Attributes
    ----------
    hbar : float
        Reduced Planck constant [J s].
    kB : float
        Boltzmann constant [J/K].
    D : float
        NV zero-field splitting as an angular frequency [rad/s].
    default_density : float
        Mass density used for ellipsoidal rotors [kg/m^3] (diamond).
    """

    hbar: float = _sc.hbar
    kB: float = _sc.k
    D: float = 2.0 * np.pi * 2.87e9
    default_density: float = 3510.0

    def __post_init__(self):
        for name in ("hbar", "kB", "D", "default_density"):
            if not getattr(self, name) > 0:
                raise ValueError(f"constant {name} must be strictly positive")


DEFAULT = PhysicalConstants()

HBAR = DEFAULT.hbar
KB = DEFAULT.kB
D_NV = DEFAULT.D
DIAMOND_DENSITY = DEFAULT.default_density
