"""One-dimensional pendulum model for rotations about the symmetry axis.

For a rotor spinning rapidly about n2 with total angular momentum ``J``, the
angle ``gamma`` about the (near-)symmetry axis n3 obeys

    H(gamma, p) = p^2 / (2 M) + V(gamma)
    V(gamma)    = -(S2 J / I2) sin(gamma) + (I1 - I2) J^2 sin^2(gamma) / (2 I1 I2)

with ``M = I1 I3 / (I1 - I3)``.  For a symmetric rotor (``I1 = I2 = I``) ``M``
is the usual effective moment ``I_eff = I I3 / (I - I3)``, positive for
prolate and negative for oblate bodies.  ``p`` is the body-frame ``J3``.

This module also carries the closed-form stability thresholds, the thermal
bound and the Gaussian decay time of the alignment.
"""

from __future__ import annotations

import csv
import io
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _rk
from .constants import KB
from .dynamics import IntegrationError, IntegratorSettings, sample_times


class UndefinedInertiaError(ValueError):
    """The effective moment diverges (``I = I3``)."""


@dataclass(frozen=True)
class PendulumParams:
    """Parameters of the effective pendulum.

    Attributes
    ----------
    I : float
        Transverse moment ``I1 = I2`` of a symmetric rotor [kg m^2].
    I3 : float
        Moment about the symmetry axis [kg m^2].
    S2 : float
        Spin component along n2 [J s] (signed).
    J : float
        Magnitude of the total angular momentum [J s].
    asym : (float, float) or None
        ``(I1, I2)`` of a near-symmetric rotor; ``None`` means ``(I, I)``.
    """

    I: float
    I3: float
    S2: float
    J: float
    asym: tuple | None = None

    def __post_init__(self):
        if not (self.I > 0 and self.I3 > 0):
            raise ValueError("moments must be positive")
        if self.J < 0:
            raise ValueError("J must be non-negative")
        if self.asym is not None:
            object.__setattr__(self, "asym", (float(self.asym[0]), float(self.asym[1])))

    @classmethod
    def from_inertia(cls, inertia, S2, J):
        if inertia.I1 == inertia.I2:
            return cls(inertia.I1, inertia.I3, S2, J)
        return cls(inertia.I2, inertia.I3, S2, J, asym=(inertia.I1, inertia.I2))

    @property
    def I1(self):
        return self.asym[0] if self.asym else self.I

    @property
    def I2(self):
        return self.asym[1] if self.asym else self.I

    @property
    def is_symmetric(self):
        return self.asym is None or self.asym[0] == self.asym[1]

    @property
    def I_eff(self):
        """Signed effective moment ``I1 I3 / (I1 - I3)``."""
        if self.I1 == self.I3:
            raise UndefinedInertiaError("I_eff diverges for I = I3")
        return self.I1 * self.I3 / (self.I1 - self.I3)

    @property
    def spin_coeff(self):
        """Amplitude ``S2 J / I2`` of the spin-induced potential [J]."""
        return self.S2 * self.J / self.I2

    @property
    def asym_coeff(self):
        """``(I1 - I2) J^2 / (I1 I2)`` [J]."""
        return (self.I1 - self.I2) * self.J ** 2 / (self.I1 * self.I2)


def effective_potential(gamma, params):
    """``V(gamma)`` including the mid-axis term of near-symmetric rotors."""
    s = np.sin(gamma)
    return -params.spin_coeff * s + 0.5 * params.asym_coeff * s * s


def potential_curvature(gamma, params):
    """Analytic ``V''(gamma)``."""
    return params.spin_coeff * np.sin(gamma) + params.asym_coeff * np.cos(2 * gamma)


def h_eff_energy(p_gamma, gamma, params):
    """Pendulum energy ``p^2/(2 I_eff) - (S2 J / I) sin(gamma)`` (+ asymmetry term)."""
    return p_gamma ** 2 / (2 * params.I_eff) + effective_potential(gamma, params)


def small_oscillation_frequency(params, gamma0=np.pi / 2):
    """Angular frequency of small oscillations about ``gamma0``.

    For a symmetric rotor at ``pi/2`` this is
    ``sqrt(S2 J (I - I3) / (I^2 I3))``; NaN if ``gamma0`` is not a minimum
    of the motion (``V''/I_eff <= 0``).
    """
    k = potential_curvature(gamma0, params) / params.I_eff
    return float(np.sqrt(k)) if k > 0 else float("nan")


# --- thresholds --------------------------------------------------------------

TurningPoint = namedtuple("TurningPoint", ["singamma_min", "trapped", "raw"])


def turning_point_singamma(p0, params):
    """Lowest ``sin(gamma)`` reached from ``gamma = pi/2`` with momentum ``p0``.

    ``raw = 1 - I p0^2 / (2 I_eff S2 J)`` from energy conservation of the
    symmetric pendulum; ``singamma_min`` is ``raw`` clamped to [-1, 1].  The
    motion is untrapped (``trapped=False``) when ``raw < -1`` or when the
    spin does not make ``pi/2`` a potential minimum (``S2 I_eff <= 0``).
    """
    if params.S2 * params.I_eff <= 0:
        return TurningPoint(-1.0, False, -np.inf)
    raw = 1.0 - params.I * p0 ** 2 / (2.0 * params.I_eff * params.S2 * params.J)
    return TurningPoint(float(np.clip(raw, -1.0, 1.0)), bool(raw >= -1.0), float(raw))


def threshold_sym(p0, I, I3, J):
    """Spin ``S2`` that keeps ``sin(gamma) >= 4/5``: ``(5/2)(I/I3 - 1) p0^2 / J``."""
    return 2.5 * (I / I3 - 1.0) * p0 ** 2 / J


def threshold_asym(I1, I2, J):
    """Spin ``S2`` above which ``gamma = pi/2`` becomes a trap: ``(I1 - I2) J / I1``."""
    return (I1 - I2) * J / I1


def thermal_bound(S2, J, I, I3, kB=KB):
    """Temperature below which the spin stabilizes a thermal state: ``S2 J / (kB (I - I3))``.

    Order-of-magnitude only; prefactors of order one are dropped.
    """
    return S2 * J / (kB * (I - I3))


def tau_sym(I, I3, T, kB=KB):
    """Gaussian decay time ``|I_eff| / sqrt(I3 kB T)`` of the mid-axis alignment."""
    if I == I3:
        raise UndefinedInertiaError("tau_sym diverges for I = I3")
    if not T > 0:
        raise ValueError("temperature must be positive")
    return abs(I3 * I / (I - I3)) / np.sqrt(I3 * kB * T)


def oblate_duality_map(params):
    """Map onto the rotor with ``(I_eff, S2) -> (-I_eff, -S2)`` and ``V -> -V``.

    ``gamma(t)`` is unchanged provided the initial momentum is negated.  ``I``
    (or ``I1, I2``, which swap) and ``J`` are kept; the symmetry-axis moment
    is solved for.  Raises ``ValueError`` when no positive moment exists
    (strongly elongated rods have no oblate twin with the same ``I``).
    """
    M_target = -params.I_eff
    if params.is_symmetric:
        a = params.I
        I3 = M_target * a / (a + M_target) if a + M_target != 0 else -1.0
        if not I3 > 0:
            raise ValueError("no physical dual rotor for these moments")
        return PendulumParams(params.I, I3, -params.S2, params.J)
    I1, I2 = params.I2, params.I1
    I3 = M_target * I1 / (I1 + M_target) if I1 + M_target != 0 else -1.0
    if not I3 > 0:
        raise ValueError("no physical dual rotor for these moments")
    S2 = -params.S2 * I2 / I1
    return PendulumParams(I2, I3, S2, params.J, asym=(I1, I2))


# --- integration ---------------------------------------------------------------

# params: M  a  b  P_s  E_s  h0  project
@njit(cache=True, nogil=True)
def _rhs_pend(t, y, p, out):
    g = y[0]
    out[0] = y[1] * p[3] / p[0]
    out[1] = (p[1] * np.cos(g) - p[2] * np.sin(g) * np.cos(g)) / p[3]


@njit(cache=True, nogil=True)
def _energy_scaled(y, p):
    s = np.sin(y[0])
    P = y[1] * p[3]
    return (P * P / (2.0 * p[0]) - p[1] * s + 0.5 * p[2] * s * s) / p[4]


@njit(cache=True, nogil=True)
def _post_pend(t, y, p):
    if p[6] <= 0:
        return False
    for _ in range(3):
        dh = _energy_scaled(y, p) - p[5]
        if abs(dh) < 1e-17:
            break
        g = y[0]
        gg = (-p[1] * np.cos(g) + p[2] * np.sin(g) * np.cos(g)) / p[4]
        gu = y[1] * p[3] * p[3] / (p[0] * p[4])
        n2 = gg * gg + gu * gu
        if n2 == 0.0:
            break
        y[0] -= dh * gg / n2
        y[1] -= dh * gu / n2
    return True


@dataclass
class PendulumTrajectory:
    times: np.ndarray
    gamma: np.ndarray
    p_gamma: np.ndarray
    params: PendulumParams

    @property
    def singamma(self):
        return np.sin(self.gamma)

    @property
    def energy(self):
        return h_eff_energy(self.p_gamma, self.gamma, self.params)


def integrate_pendulum(gamma0, p0, params, t_span, settings=None, t_eval=None):
    """Integrate ``gamma' = p / I_eff``, ``p' = -V'(gamma)``.

    This is the second-order equation

        gamma'' = -(I1-I2)(I1-I3) J^2 sin(g) cos(g) / (I1^2 I2 I3)
                  + (I1-I3) J S2 cos(g) / (I1 I2 I3)

    which reduces to ``(I-I3) J S2 cos(g) / (I^2 I3)`` for symmetric rotors.
    """
    settings = settings or IntegratorSettings()
    M = params.I_eff
    a, b = params.spin_coeff, params.asym_coeff
    E_s = abs(a) + abs(b) + p0 ** 2 / abs(M)
    if E_s == 0:
        E_s = 1.0
    P_s = np.sqrt(abs(M) * E_s)
    prm = np.array([M, a, b, P_s, E_s, 0.0, 1.0 if settings.project_invariants else 0.0])
    y0 = np.array([float(gamma0), p0 / P_s])
    prm[5] = _energy_scaled(y0, prm)
    t0, t1 = map(float, t_span)
    times = sample_times(t0, t1, settings.sample_interval) if t_eval is None else np.asarray(t_eval, float)
    Y, status, t_reached, _ = _rk.solve(_rhs_pend, _post_pend, prm, t0, y0, times,
                                        settings.rel_tol, settings.abs_tol,
                                        settings.max_step, settings.max_steps)
    if status != _rk.OK:
        raise IntegrationError("pendulum integration failed", t_reached)
    return PendulumTrajectory(times, Y[:, 0], Y[:, 1] * P_s, params)


def sampled_minimum(t, x):
    """Minimum of a sampled smooth curve, refined by a parabola through the
    lowest sample and its neighbours."""
    i = int(np.argmin(x))
    if i == 0 or i == len(x) - 1:
        return float(x[i])
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    h = t[i + 1] - t[i]
    if abs((t[i] - t[i - 1]) - h) > 1e-9 * h:
        return float(x1)
    den = x0 - 2 * x1 + x2
    if den <= 0:
        return float(x1)
    return float(x1 - (x2 - x0) ** 2 / (8 * den))


SWEEP_COLUMNS = ("S2_over_threshold", "singamma_min_predicted", "singamma_min_measured", "trapped_flag")


def threshold_sweep(ratios, p0, inertia, J, n_periods=3.0, samples_per_period=2000, settings=None):
    """Scan ``S2 / threshold_sym`` and compare predicted with simulated turning points.

    The measurement runs the full Euler equations from ``gamma = pi/2``,
    ``J3 = p0`` and records the minimum of ``sin(gamma)`` over
    ``n_periods`` small-oscillation periods.  Returns a list of row dicts.
    """
    from .dynamics import integrate_hard_magnet
    from .rotor import Orientation, RotorState

    I, I3 = inertia.I1, inertia.I3
    thr = threshold_sym(p0, I, I3, J)
    if not thr > 0:
        raise ValueError("threshold vanishes; need p0 != 0 and I != I3")
    J_body = np.array([0.0, np.sqrt(J * J - p0 * p0), p0])
    rows = []
    for r in ratios:
        S2 = r * thr
        prm = PendulumParams.from_inertia(inertia, S2, J)
        tp = turning_point_singamma(p0, prm)
        w0 = small_oscillation_frequency(prm)
        T = n_periods * 2 * np.pi / w0 if np.isfinite(w0) else n_periods * 2 * np.pi * abs(prm.I_eff) / abs(p0)
        s = settings or IntegratorSettings(sample_interval=2 * np.pi / w0 / samples_per_period
                                           if np.isfinite(w0) else T / (n_periods * samples_per_period))
        tr = integrate_hard_magnet(RotorState(Orientation.identity(), J_body), [0.0, S2, 0.0],
                                   inertia, (0.0, T), s, track_orientation=False)
        measured = sampled_minimum(tr.times, np.sin(tr.gamma))
        rows.append({
            "S2_over_threshold": float(r),
            "singamma_min_predicted": tp.singamma_min,
            "singamma_min_measured": measured,
            "trapped_flag": int(tp.trapped and tp.raw >= 0.8 - 1e-12),
        })
    return rows


def sweep_to_csv(rows, path=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow([repr(row[c]) for c in SWEEP_COLUMNS])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
