"""Rigid-rotor geometry: inertia, orientation and angular-momentum conversions.

Orientation is stored as a unit quaternion ``q = (w, x, y, z)`` describing the
body-to-space rotation, so that ``v_space = R(q) @ v_body`` and the body axes
``n_k`` are the columns of ``R(q)``.  Euler angles use the z-y'-z'' convention:
a rotation by ``alpha`` about ``e_z``, then ``beta`` about the new y axis, then
``gamma`` about the new z axis, i.e. ``R = Rz(alpha) @ Ry(beta) @ Rz(gamma)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .constants import DIAMOND_DENSITY

# relative tolerance for "exactly equal" moments
EXACT_TOL = 1e-12
# |sin(beta)| below which Euler angles are gimbal-locked
GIMBAL_EPS = 1e-8


class InvalidGeometryError(ValueError):
    """Raised for non-physical rotor geometry or inertia."""


class RotorClass(str, enum.Enum):
    SYMMETRIC_PROLATE = "SymmetricProlate"
    SYMMETRIC_OBLATE = "SymmetricOblate"
    NEAR_PROLATE = "NearProlate"
    NEAR_OBLATE = "NearOblate"
    GENERIC = "Generic"


def _close(a, b, tol):
    return abs(a - b) <= tol * max(abs(a), abs(b))


def classify_rotor(I1, I2, I3, tol=0.1, exact_tol=EXACT_TOL):
    """Classify principal moments into a :class:`RotorClass`.

    ``exact_tol`` is the relative tolerance for treating ``I1 == I2``;
    ``tol`` bounds the relative asymmetry of the near-symmetric classes.
    A sphere (all three moments equal) is reported as ``GENERIC``.
    """
    if min(I1, I2, I3) <= 0:
        raise InvalidGeometryError("moments of inertia must be positive")
    if _close(I1, I2, exact_tol):
        if _close(I1, I3, exact_tol):
            return RotorClass.GENERIC
        return RotorClass.SYMMETRIC_PROLATE if I1 > I3 else RotorClass.SYMMETRIC_OBLATE
    if I1 >= I2 > I3 and (I1 - I2) / I1 <= tol:
        return RotorClass.NEAR_PROLATE
    if I3 > I2 >= I1 and (I2 - I1) / I2 <= tol:
        return RotorClass.NEAR_OBLATE
    return RotorClass.GENERIC


@dataclass(frozen=True)
class InertiaSpec:
    """Principal moments of inertia about the body axes n1, n2, n3 [kg m^2]."""

    I1: float
    I2: float
    I3: float
    symmetry_tolerance: float = 0.1
    rotor_class: RotorClass = field(default=None)

    def __post_init__(self):
        moments = (self.I1, self.I2, self.I3)
        if not all(np.isfinite(m) and m > 0 for m in moments):
            raise InvalidGeometryError(f"moments must be positive and finite, got {moments}")
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            # small slack so that flat discs (I3 = I1 + I2) pass
            if moments[i] + moments[j] < moments[k] * (1 - 1e-12):
                raise InvalidGeometryError(f"triangle inequality violated by {moments}")
        cls = classify_rotor(*moments, tol=self.symmetry_tolerance)
        if self.rotor_class is None:
            object.__setattr__(self, "rotor_class", cls)
        else:
            object.__setattr__(self, "rotor_class", RotorClass(self.rotor_class))
            if self.rotor_class != cls:
                raise InvalidGeometryError(
                    f"moments {moments} classify as {cls.value}, not {self.rotor_class.value}")

    @property
    def moments(self):
        return np.array([self.I1, self.I2, self.I3])

    @property
    def transverse(self):
        """Mean transverse moment ``(I1 + I2) / 2``."""
        return 0.5 * (self.I1 + self.I2)

    @property
    def is_symmetric(self):
        return self.rotor_class in (RotorClass.SYMMETRIC_PROLATE, RotorClass.SYMMETRIC_OBLATE)


def ellipsoid_inertia(a, b, c, density=DIAMOND_DENSITY, symmetry_tolerance=0.1):
    """Inertia of a homogeneous ellipsoid with semiaxes ``a, b, c`` [m].

    ``c`` lies along the symmetry axis n3.  The transverse semiaxes are
    swapped if needed so that near-prolate bodies get ``I1 >= I2`` and
    near-oblate bodies ``I2 >= I1``.
    """
    if not all(np.isfinite(x) and x > 0 for x in (a, b, c, density)):
        raise InvalidGeometryError("semiaxes and density must be positive")
    prolate_like = c > max(a, b)
    if (prolate_like and a > b) or (not prolate_like and b > a):
        a, b = b, a
    m = 4.0 / 3.0 * np.pi * a * b * c * density
    return InertiaSpec(
        I1=m * (b * b + c * c) / 5.0,
        I2=m * (a * a + c * c) / 5.0,
        I3=m * (a * a + b * b) / 5.0,
        symmetry_tolerance=symmetry_tolerance,
    )


# --- quaternions -----------------------------------------------------------

def quat_mul(p, q):
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ])


def quat_to_matrix(q):
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _axis_quat(axis, angle):
    q = np.zeros(4)
    q[0] = np.cos(angle / 2)
    q[axis + 1] = np.sin(angle / 2)
    return q


@dataclass(frozen=True)
class Orientation:
    """Body orientation as a unit quaternion (body-to-space)."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        n = np.linalg.norm(q)
        if q.shape != (4,) or not n > 0:
            raise ValueError("quaternion must be a non-zero 4-vector")
        q = q / n
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @classmethod
    def identity(cls):
        return cls(np.array([1.0, 0.0, 0.0, 0.0]))

    @property
    def matrix(self):
        return quat_to_matrix(self.q)

    @property
    def axes(self):
        """Body axes ``(n1, n2, n3)`` in the space frame, one per row."""
        return self.matrix.T

    def euler(self):
        return orientation_to_euler(self)


def euler_to_orientation(alpha, beta, gamma):
    """Orientation from z-y'-z'' Euler angles."""
    q = quat_mul(quat_mul(_axis_quat(2, alpha), _axis_quat(1, beta)), _axis_quat(2, gamma))
    return Orientation(q)


def euler_matrix(alpha, beta, gamma):
    ca, sa = np.cos(alpha), np.sin(alpha)
    cb, sb = np.cos(beta), np.sin(beta)
    cg, sg = np.cos(gamma), np.sin(gamma)
    rz_a = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    ry_b = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz_g = np.array([[cg, -sg, 0], [sg, cg, 0], [0, 0, 1]])
    return rz_a @ ry_b @ rz_g


def matrix_to_euler(R):
    """z-y'-z'' angles from a rotation matrix, ``alpha, gamma`` in (-pi, pi].

    When gimbal-locked (``|sin beta| < 1e-8``) gamma is set to zero and the
    whole in-plane rotation is assigned to alpha.
    """
    R = np.asarray(R)
    sb = np.hypot(R[0, 2], R[1, 2])
    beta = np.arctan2(sb, R[2, 2])
    if sb < GIMBAL_EPS:
        if R[2, 2] > 0:
            return np.arctan2(R[1, 0], R[0, 0]), beta, 0.0
        return np.arctan2(-R[1, 0], -R[0, 0]), beta, 0.0
    alpha = np.arctan2(R[1, 2], R[0, 2])
    gamma = np.arctan2(R[2, 1], -R[2, 0])
    return alpha, beta, gamma


def orientation_to_euler(orientation):
    q = orientation.q if isinstance(orientation, Orientation) else orientation
    return matrix_to_euler(quat_to_matrix(q))


# --- angular momentum ------------------------------------------------------

def body_angmom_from_euler(J, beta, gamma):
    """Body components ``(J1, J2, J3)`` of a total angular momentum ``J e_z``."""
    sb = np.sin(beta)
    return np.array([-J * sb * np.cos(gamma), J * sb * np.sin(gamma), J * np.cos(beta)])


def omega_from_J(J_body, S_body, inertia):
    """Body angular velocity ``(J_k - S_k) / I_k``."""
    return (np.asarray(J_body, dtype=float) - np.asarray(S_body, dtype=float)) / inertia.moments


@dataclass(frozen=True)
class RotorState:
    orientation: Orientation
    J_body: np.ndarray

    def __post_init__(self):
        J = np.array(self.J_body, dtype=float)
        if J.shape != (3,):
            raise ValueError("J_body must be a 3-vector")
        J.setflags(write=False)
        object.__setattr__(self, "J_body", J)

    @property
    def J(self):
        return float(np.linalg.norm(self.J_body))

    @property
    def J_space(self):
        return self.orientation.matrix @ self.J_body

    @classmethod
    def from_euler(cls, J, alpha, beta, gamma):
        """State with total angular momentum ``J e_z`` and the given Euler angles."""
        return cls(euler_to_orientation(alpha, beta, gamma), body_angmom_from_euler(J, beta, gamma))
