"""Torque-free rotation of a rigid body carrying a body-fixed spin.

The state is propagated as ``(q, J_body)``: a unit quaternion and the body
components of the total angular momentum.  With ``omega_k = (J_k - S_k)/I_k``
the equations of motion are

    dJ_body/dt = J_body x omega          (Euler equations with spin)
    dq/dt      = q * (0, omega) / 2      (body-frame kinematics)

Both are integrated with the compiled DOP853 stepper in :mod:`._rk`.  After
each step the state is projected back onto the manifold of exact invariants
(unit quaternion, ``|J|``, hard-magnet energy, space-fixed ``J``); see
:class:`IntegratorSettings`.
"""

from __future__ import annotations

import csv
import io
import json
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import _rk
from .rotor import (
    GIMBAL_EPS,
    InertiaSpec,
    Orientation,
    RotorState,
    quat_to_matrix,
)

CSV_COLUMNS = (
    "t", "q0", "q1", "q2", "q3", "J1", "J2", "J3",
    "gamma", "singamma", "beta", "align_geom", "align_proxy", "energy",
)


class IntegrationError(RuntimeError):
    """Integration stopped early; ``last_good_time`` is the last accepted time."""

    def __init__(self, message, last_good_time):
        super().__init__(f"{message} (last good time {last_good_time:.6g} s)")
        self.last_good_time = last_good_time


class CoordinateSingularityError(ValueError):
    pass


@dataclass(frozen=True)
class IntegratorSettings:
    """Tolerances and sampling for the adaptive integrators.

    ``rel_tol``/``abs_tol`` act on the scaled state (quaternion and
    ``J_body/|J(0)|``), so both are dimensionless.  ``sample_interval=None``
    means 1000 samples over the requested span.

    ``project_invariants`` switches on the post-step projection onto the
    exactly conserved quantities.  Plain DOP853 at ``rel_tol=1e-10`` drifts
    by ~1e-11 per rotation period, which accumulates to ~1e-5 over 1e6
    periods; the projection removes that secular drift.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = np.inf
    sample_interval: float | None = None
    project_invariants: bool = True
    max_steps: int = 2_000_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-3:
                raise ValueError(f"{name} must lie in (0, 1e-3], got {v}")
        if self.sample_interval is not None and not self.sample_interval > 0:
            raise ValueError("sample_interval must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


def sample_times(t0, t1, interval=None, n_default=1000):
    """Uniform grid from ``t0`` towards ``t1`` (inclusive), spacing ``interval``."""
    span = t1 - t0
    if span == 0:
        return np.array([t0])
    if interval is None:
        interval = abs(span) / n_default
    n = int(np.floor(abs(span) / interval * (1 + 1e-12)))
    t = t0 + np.sign(span) * interval * np.arange(n + 1)
    if abs(t[-1] - t1) > 1e-9 * interval:
        t = np.append(t, t1)
    else:
        t[-1] = t1
    return t


# --- right-hand sides ------------------------------------------------------

def euler_rhs(J_body, S_body, inertia):
    """Time derivative of the body-frame angular momentum (hard-magnet regime).

    For even permutations ``(i, j, k)``::

        dJ_i/dt = (I_j - I_k)/(I_k I_j) J_j J_k - S_k J_j / I_k + S_j J_k / I_j
    """
    J = np.asarray(J_body, dtype=float)
    S = np.asarray(S_body, dtype=float)
    I = inertia.moments
    out = np.empty(3)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        out[i] = ((I[j] - I[k]) / (I[k] * I[j]) * J[j] * J[k]
                  - S[k] * J[j] / I[k] + S[j] * J[k] / I[j])
    return out


# params: I1 I2 I3 Jref S1 S2 S3 | flags(J, E, space) | j0^2  e0  js0(3)
_P_FLAGS = 7
_P_REF = 10


@njit(cache=True, nogil=True)
def _omega(y, p, o):
    Jr = p[3]
    return ((y[o] * Jr - p[4]) / p[0],
            (y[o + 1] * Jr - p[5]) / p[1],
            (y[o + 2] * Jr - p[6]) / p[2])


@njit(cache=True, nogil=True)
def _rhs_full(t, y, p, out):
    w0, w1, w2 = _omega(y, p, 4)
    out[4] = y[5] * w2 - y[6] * w1
    out[5] = y[6] * w0 - y[4] * w2
    out[6] = y[4] * w1 - y[5] * w0
    qw, qx, qy, qz = y[0], y[1], y[2], y[3]
    out[0] = 0.5 * (-qx * w0 - qy * w1 - qz * w2)
    out[1] = 0.5 * (qw * w0 + qy * w2 - qz * w1)
    out[2] = 0.5 * (qw * w1 - qx * w2 + qz * w0)
    out[3] = 0.5 * (qw * w2 + qx * w1 - qy * w0)


@njit(cache=True, nogil=True)
def _rhs_J(t, y, p, out):
    w0, w1, w2 = _omega(y, p, 0)
    out[0] = y[1] * w2 - y[2] * w1
    out[1] = y[2] * w0 - y[0] * w2
    out[2] = y[0] * w1 - y[1] * w0


@njit(cache=True, nogil=True)
def _project_J(y, o, p):
    """Project scaled J onto {|j| = j0, energy = e0} (sphere only if E is off)."""
    j0sq = p[_P_REF]
    if p[_P_FLAGS + 1] > 0:
        Jr = p[3]
        c0 = p[_P_REF + 1]
        w0, w1, w2 = 1.0, p[0] / p[1], p[0] / p[2]
        s0, s1, s2 = p[4] / Jr, p[5] / Jr, p[6] / Jr
        for _ in range(3):
            # g1 = |j|^2 - j0^2 ; g2 = sum_k (I1/I_k) (j_k - s_k)^2 - c0
            j0, j1, j2 = y[o], y[o + 1], y[o + 2]
            d0, d1, d2 = j0 - s0, j1 - s1, j2 - s2
            g1 = j0 * j0 + j1 * j1 + j2 * j2 - j0sq
            g2 = w0 * d0 * d0 + w1 * d1 * d1 + w2 * d2 * d2 - c0
            a0, a1, a2 = 2.0 * j0, 2.0 * j1, 2.0 * j2
            b0, b1, b2 = 2.0 * w0 * d0, 2.0 * w1 * d1, 2.0 * w2 * d2
            aa = a0 * a0 + a1 * a1 + a2 * a2
            bb = b0 * b0 + b1 * b1 + b2 * b2
            ab = a0 * b0 + a1 * b1 + a2 * b2
            det = aa * bb - ab * ab
            if det <= 1e-10 * aa * bb:
                break
            # Newton step along the constraint gradients
            l1 = (-g1 * bb + g2 * ab) / det
            l2 = (-g2 * aa + g1 * ab) / det
            y[o] += l1 * a0 + l2 * b0
            y[o + 1] += l1 * a1 + l2 * b1
            y[o + 2] += l1 * a2 + l2 * b2
            if abs(g1) + abs(g2) < 1e-17:
                break
    nj = np.sqrt(y[o] * y[o] + y[o + 1] * y[o + 1] + y[o + 2] * y[o + 2])
    sc = np.sqrt(j0sq) / nj
    for k in range(3):
        y[o + k] *= sc


@njit(cache=True, nogil=True)
def _post_full(t, y, p):
    if p[_P_FLAGS] > 0:
        _project_J(y, 4, p)
    if p[_P_FLAGS + 2] > 0:
        # rotate q on the space side so that R(q) j lines up with js0
        qw, qx, qy, qz = y[0], y[1], y[2], y[3]
        j1, j2, j3 = y[4], y[5], y[6]
        v0 = (1 - 2 * (qy * qy + qz * qz)) * j1 + 2 * (qx * qy - qw * qz) * j2 + 2 * (qx * qz + qw * qy) * j3
        v1 = 2 * (qx * qy + qw * qz) * j1 + (1 - 2 * (qx * qx + qz * qz)) * j2 + 2 * (qy * qz - qw * qx) * j3
        v2 = 2 * (qx * qz - qw * qy) * j1 + 2 * (qy * qz + qw * qx) * j2 + (1 - 2 * (qx * qx + qy * qy)) * j3
        nv = np.sqrt(v0 * v0 + v1 * v1 + v2 * v2)
        u0, u1, u2 = p[_P_REF + 2], p[_P_REF + 3], p[_P_REF + 4]
        nu = np.sqrt(u0 * u0 + u1 * u1 + u2 * u2)
        v0 /= nv
        v1 /= nv
        v2 /= nv
        u0 /= nu
        u1 /= nu
        u2 /= nu
        # half-way quaternion for the rotation v -> u
        dw = 1.0 + v0 * u0 + v1 * u1 + v2 * u2
        dx = v1 * u2 - v2 * u1
        dy = v2 * u0 - v0 * u2
        dz = v0 * u1 - v1 * u0
        dn = np.sqrt(dw * dw + dx * dx + dy * dy + dz * dz)
        if dw > 1e-3 * dn:
            dw /= dn
            dx /= dn
            dy /= dn
            dz /= dn
            y[0] = dw * qw - dx * qx - dy * qy - dz * qz
            y[1] = dw * qx + dx * qw + dy * qz - dz * qy
            y[2] = dw * qy - dx * qz + dy * qw + dz * qx
            y[3] = dw * qz + dx * qy - dy * qx + dz * qw
    nq = np.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3])
    for i in range(4):
        y[i] /= nq
    return True


@njit(cache=True, nogil=True)
def _post_J(t, y, p):
    if p[_P_FLAGS] > 0:
        _project_J(y, 0, p)
        return True
    return False


def _params(inertia, S_body, J0_body, q0, project):
    J0_body = np.asarray(J0_body, dtype=float)
    Jref = float(np.linalg.norm(J0_body))
    if Jref == 0:
        Jref = 1.0
    S = np.asarray(S_body, dtype=float)
    p = np.zeros(_P_REF + 5)
    p[0:3] = inertia.moments
    p[3] = Jref
    p[4:7] = S
    j = J0_body / Jref
    w = inertia.I1 / inertia.moments
    p[_P_REF] = j @ j
    p[_P_REF + 1] = np.sum(w * (j - S / Jref) ** 2)
    if q0 is not None:
        p[_P_REF + 2:_P_REF + 5] = quat_to_matrix(q0) @ j
    if project:
        p[_P_FLAGS] = 1.0
        p[_P_FLAGS + 1] = 1.0
        p[_P_FLAGS + 2] = 1.0 if q0 is not None else 0.0
    return p, Jref


# --- trajectories ----------------------------------------------------------

Alignment = namedtuple("Alignment", ["geometric", "proxy"])


def angles_from_J(J_body):
    """``(beta, gamma)`` of the z-y'-z'' angles in the frame where ``J = J e_z``."""
    J_body = np.atleast_2d(J_body)
    Jn = np.linalg.norm(J_body, axis=1)
    beta = np.arccos(np.clip(J_body[:, 2] / Jn, -1.0, 1.0))
    gamma = np.arctan2(J_body[:, 1], -J_body[:, 0])
    return beta, gamma


@dataclass
class Trajectory:
    """Sampled rotor trajectory.

    ``q`` is NaN-filled when orientation was not tracked.  ``S_body`` has one
    row per sample (constant rows in the hard-magnet regime).
    """

    times: np.ndarray
    q: np.ndarray
    J_body: np.ndarray
    S_body: np.ndarray
    inertia: InertiaSpec
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def has_orientation(self):
        return not np.isnan(self.q).any()

    @property
    def states(self):
        return [RotorState(Orientation(q) if np.isfinite(q).all() else Orientation.identity(), J)
                for q, J in zip(self.q, self.J_body)]

    @property
    def J(self):
        return np.linalg.norm(self.J_body, axis=1)

    @property
    def beta(self):
        return angles_from_J(self.J_body)[0]

    @property
    def gamma(self):
        return angles_from_J(self.J_body)[1]

    @property
    def energy(self):
        """Hard-magnet energy ``sum_k (J_k - S_k)^2 / (2 I_k)``."""
        return np.sum((self.J_body - self.S_body) ** 2 / (2 * self.inertia.moments), axis=1)

    @property
    def J_space(self):
        if not self.has_orientation:
            raise ValueError("orientation was not tracked")
        return np.einsum("nij,nj->ni", _quat_matrices(self.q), self.J_body)

    def alignment(self):
        return alignment(self)

    def as_table(self):
        """Array with the columns of :data:`CSV_COLUMNS`."""
        beta, gamma = angles_from_J(self.J_body)
        al = alignment(self)
        return np.column_stack([
            self.times, self.q, self.J_body, gamma, np.sin(gamma), beta,
            al.geometric, al.proxy, self.energy,
        ])

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.as_table():
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_records(self):
        return [dict(zip(CSV_COLUMNS, map(float, row))) for row in self.as_table()]

    def to_json(self, path=None):
        text = json.dumps(self.to_records(), allow_nan=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _quat_matrices(q):
    q = q / np.linalg.norm(q, axis=1, keepdims=True)
    w, x, y, z = q.T
    R = np.empty((len(q), 3, 3))
    R[:, 0, 0] = 1 - 2 * (y * y + z * z)
    R[:, 0, 1] = 2 * (x * y - w * z)
    R[:, 0, 2] = 2 * (x * z + w * y)
    R[:, 1, 0] = 2 * (x * y + w * z)
    R[:, 1, 1] = 1 - 2 * (x * x + z * z)
    R[:, 1, 2] = 2 * (y * z - w * x)
    R[:, 2, 0] = 2 * (x * z - w * y)
    R[:, 2, 1] = 2 * (y * z + w * x)
    R[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def alignment(traj):
    """Alignment of n2 with e2: geometric ``e2 . n2`` and proxy ``J2 / |J|``.

    The proxy assumes the space frame has ``J`` along e_z with the rotor
    spinning about n2, as for the thermal ensembles.  The geometric value is
    NaN when orientation was not tracked.
    """
    proxy = traj.J_body[:, 1] / np.linalg.norm(traj.J_body, axis=1)
    if traj.has_orientation:
        geometric = _quat_matrices(traj.q)[:, 1, 1]
    else:
        geometric = np.full(len(traj.times), np.nan)
    return Alignment(geometric, proxy)


def integrate_hard_magnet(state0, S_body, inertia, t_span, settings=None,
                          track_orientation=True, t_eval=None):
    """Integrate the spin-coupled Euler equations with constant body-frame spin.

    Parameters
    ----------
    state0 : RotorState
    S_body : array_like, shape (3,)
        Body-frame spin angular momentum [J s].
    inertia : InertiaSpec
    t_span : (float, float)
        Start and end time [s]; the end may precede the start.
    settings : IntegratorSettings, optional
    track_orientation : bool
        Integrate the quaternion as well.  The body-frame ``J`` obeys an
        autonomous equation, so ensembles that only need ``J2/J`` skip it.
    t_eval : array_like, optional
        Explicit sample times overriding ``settings.sample_interval``.

    Raises
    ------
    IntegrationError
        On step-size underflow or when ``settings.max_steps`` is exhausted.
    """
    settings = settings or IntegratorSettings()
    t0, t1 = map(float, t_span)
    S = np.asarray(S_body, dtype=float)
    if t_eval is None:
        times = sample_times(t0, t1, settings.sample_interval)
    else:
        times = np.asarray(t_eval, dtype=float)
    q0 = state0.orientation.q if track_orientation else None
    p, Jref = _params(inertia, S, state0.J_body, q0, settings.project_invariants)
    j0 = np.asarray(state0.J_body) / Jref
    if track_orientation:
        y0 = np.concatenate([q0, j0])
        Y, status, t_reached, n_steps = _rk.solve(
            _rhs_full, _post_full, p, t0, y0, times, settings.rel_tol, settings.abs_tol,
            settings.max_step, settings.max_steps)
        q = Y[:, :4]
        J = Y[:, 4:] * Jref
    else:
        Y, status, t_reached, n_steps = _rk.solve(
            _rhs_J, _post_J, p, t0, j0, times, settings.rel_tol, settings.abs_tol,
            settings.max_step, settings.max_steps)
        q = np.full((len(times), 4), np.nan)
        J = Y * Jref
    if status != _rk.OK:
        reason = "step size underflow" if status == _rk.STEP_UNDERFLOW else "step budget exhausted"
        raise IntegrationError(reason, t_reached)
    spin_fraction = float(np.linalg.norm(S) / np.linalg.norm(state0.J_body)) if Jref else np.inf
    meta = {
        "n_steps": int(n_steps),
        "spin_fraction": spin_fraction,
        "weak_spin": spin_fraction < 0.1,
        "projected": settings.project_invariants,
    }
    return Trajectory(times, q, J, np.tile(S, (len(times), 1)), inertia, meta)


def euler_angle_rates(alpha, beta, gamma, J, S2, I, I3):
    """Euler-angle rates of a symmetric rotor with spin ``S2`` along n2.

    Valid for ``J = J e_z``; raises :class:`CoordinateSingularityError` when
    ``|sin beta| < 1e-8``.
    """
    sb = np.sin(beta)
    if abs(sb) < GIMBAL_EPS:
        raise CoordinateSingularityError("Euler angles are singular at sin(beta) = 0")
    cb = np.cos(beta)
    alpha_dot = J / I - S2 * np.sin(gamma) / (I * sb)
    beta_dot = -S2 / I * np.cos(gamma)
    gamma_dot = cb * (I - I3) / (I * I3) * J + cb * np.sin(gamma) / sb * S2 / I
    return alpha_dot, beta_dot, gamma_dot


def free_symmetric_top(J0_body, q0, inertia, t):
    """Closed-form torque-free motion of a symmetric top (``I1 = I2``, no spin).

    Returns ``(J_body, R)`` at times ``t`` with ``R`` the rotation matrices.
    """
    I, I3 = inertia.I1, inertia.I3
    J0 = np.asarray(J0_body, dtype=float)
    t = np.atleast_1d(t)
    Omega = (I - I3) * J0[2] / (I * I3)
    c, s = np.cos(Omega * t), np.sin(Omega * t)
    J = np.column_stack([J0[0] * c + J0[1] * s, J0[1] * c - J0[0] * s, np.full_like(t, J0[2])])
    R0 = quat_to_matrix(q0)
    Js = R0 @ J0
    Jmag = np.linalg.norm(Js)
    u = Js / Jmag
    ux = np.array([[0, -u[2], u[1]], [u[2], 0, -u[0]], [-u[1], u[0], 0]])
    R = np.empty((len(t), 3, 3))
    for n, tn in enumerate(t):
        a = Jmag / I * tn
        A = np.eye(3) + np.sin(a) * ux + (1 - np.cos(a)) * ux @ ux
        b = Omega * tn
        B = np.array([[np.cos(b), -np.sin(b), 0], [np.sin(b), np.cos(b), 0], [0, 0, 1]])
        R[n] = A @ R0 @ B
    return J, R
