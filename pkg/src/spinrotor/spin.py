"""NV spin layer: effective hard-magnet spin, the semiclassical spin-1
Hamiltonian of a rotating body, and spin propagation.

Spin states are written in the eigenbasis of ``S2`` (the spin component
along the body axis n2) ordered ``|+1>, |0>, |-1>``.  In this basis

    S1 = hbar/sqrt2 [[0, -i, 0], [i, 0, -i], [0, i, 0]]
    S2 = hbar diag(1, 0, -1)
    S3 = hbar/sqrt2 [[0, 1, 0], [1, 0, 1], [0, 1, 0]]

and an NV center with quantization axis n2 in a body rotating with body-frame
angular momentum ``J`` feels

    H = -J1 S1 / I1 - J2 S2 / I2 - J3 S3 / I3 + D S2^2 / hbar.

Propagation is carried out in the interaction picture of
``diag(hbar (D - Jf/I2), 0, hbar (D + Jf/I2))`` for a fixed frame value
``Jf``, which removes the fast zero-field phase (and, near resonance, the
nearly cancelling rotation phase) from the amplitudes.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.integrate import solve_ivp, trapezoid
from scipy.interpolate import CubicSpline

from . import _rk
from .constants import D_NV, HBAR
from .dynamics import IntegrationError, IntegratorSettings, sample_times
from .rotor import InertiaSpec, RotorState

SQRT2 = np.sqrt(2.0)
NORM_TOL = 1e-6
DEFAULT_T0 = 150e-6
# NV axes closer than this to n2 (in angle) count as parallel
PARALLEL_TOL = 1e-3

MEANFIELD_COLUMNS = ("t", "J2_over_J", "S2_over_hbar")
SCAN_COLUMNS = ("J_over_ID", "avgJ2_over_J")


class SpinNormError(RuntimeError):
    """The spin state lost normalization beyond tolerance."""


class UnsupportedSpinConfig(ValueError):
    pass


def spin_operators(hbar=HBAR):
    """``(S1, S2, S3)`` for spin 1 in the ``|+1>, |0>, |-1>`` basis of S2."""
    s = hbar / SQRT2
    S1 = s * np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]])
    S2 = hbar * np.diag([1.0, 0.0, -1.0]).astype(complex)
    S3 = s * np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex)
    return S1, S2, S3


# --- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class NVCenter:
    axis: tuple
    s: int

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float)
        if a.shape != (3,):
            raise ValueError("NV axis must be a 3-vector")
        if abs(np.linalg.norm(a) - 1.0) > 1e-12:
            raise ValueError(f"NV axis must be unit-norm, |n| = {np.linalg.norm(a)!r}")
        if self.s not in (-1, 0, 1):
            raise ValueError("NV spin projection must be -1, 0 or +1")
        object.__setattr__(self, "axis", tuple(float(x) for x in a))


@dataclass(frozen=True)
class NVConfig:
    """NV centers with body-frame quantization axes and initial projections."""

    centers: tuple = ()

    def __post_init__(self):
        cs = tuple(c if isinstance(c, NVCenter) else NVCenter(**c) for c in self.centers)
        object.__setattr__(self, "centers", cs)

    @property
    def N(self):
        return len(self.centers)

    @classmethod
    def single(cls, s=1, axis=(0.0, 1.0, 0.0)):
        return cls((NVCenter(axis, s),))

    def collective_s2(self, tol=PARALLEL_TOL):
        """Common S2 projection if all axes are (anti)parallel to n2, else None.

        An antiparallel axis flips the sign of the projection.  Centers that
        start in different S2 states do not form one collective state.
        """
        vals = set()
        for c in self.centers:
            a = np.asarray(c.axis)
            ang = np.arccos(np.clip(abs(a[1]), 0.0, 1.0))
            if ang > tol:
                return None
            vals.add(c.s if a[1] > 0 else -c.s)
        return vals.pop() if len(vals) == 1 else None


@dataclass(frozen=True)
class EffectiveSpin:
    S_body: np.ndarray
    N: int = 1

    def __post_init__(self):
        S = np.array(self.S_body, dtype=float)
        if np.linalg.norm(S) > self.N * HBAR * (1 + 1e-12):
            raise ValueError("|S| exceeds N hbar")
        S.setflags(write=False)
        object.__setattr__(self, "S_body", S)


@dataclass(frozen=True)
class SpinAmplitudes:
    """Spin-1 amplitudes ``(c_+1, c_0, c_-1)`` in the S2 eigenbasis."""

    c: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=complex)
        if c.shape != (3,):
            raise ValueError("need three amplitudes")
        if abs(np.vdot(c, c).real - 1.0) > 1e-9:
            raise ValueError("spin state must be normalized")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @classmethod
    def basis(cls, m):
        c = np.zeros(3, dtype=complex)
        c[{1: 0, 0: 1, -1: 2}[m]] = 1.0
        return cls(c)

    @property
    def populations(self):
        return np.abs(self.c) ** 2

    def expectation(self, hbar=HBAR):
        return np.array([np.vdot(self.c, S @ self.c).real for S in spin_operators(hbar)])


def spin_expectations(psi, hbar=HBAR):
    """``<S_k>`` for an array of states ``psi`` of shape (n, 3)."""
    psi = np.atleast_2d(psi)
    a = np.conj(psi[:, 0]) * psi[:, 1] + np.conj(psi[:, 1]) * psi[:, 2]
    s1 = SQRT2 * hbar * a.imag
    s2 = hbar * (np.abs(psi[:, 0]) ** 2 - np.abs(psi[:, 2]) ** 2)
    s3 = SQRT2 * hbar * a.real
    return np.column_stack([s1, s2, s3])


# --- hard-magnet reduction -------------------------------------------------

def rwa_effective_spin(config, hbar=HBAR):
    """Effective body-frame spin ``S_k = sum_m (n_m . n_k) hbar s_m``."""
    S = np.zeros(3)
    for c in config.centers:
        S += np.asarray(c.axis) * hbar * c.s
    return EffectiveSpin(S, config.N)


class Regime(str, enum.Enum):
    HARD_MAGNET = "hard_magnet"
    RESONANT = "resonant"
    INVALID_SLOW = "invalid_slow"
    INVALID_FAST = "invalid_fast"


def rwa_validity(J, inertia, N, margin=10.0, D=D_NV, hbar=HBAR):
    """Classify the rotation rate ``J / I2`` against the spin scales.

    ``hard_magnet`` when ``margin N hbar / min(I_k) < J/I2 < D / margin``,
    ``resonant`` when ``J/I2`` is within a factor ``margin`` of ``D``,
    ``invalid_slow`` when the rotation is too slow for the spin to be a
    fixed body-frame vector, and ``invalid_fast`` above ``margin D``.
    """
    rate = J / inertia.I2
    slow = N * hbar / inertia.moments.min()
    if D / margin <= rate <= D * margin:
        return Regime.RESONANT
    if rate > D * margin:
        return Regime.INVALID_FAST
    if rate > slow * margin:
        return Regime.HARD_MAGNET
    return Regime.INVALID_SLOW


# --- semiclassical Hamiltonian ---------------------------------------------

def semiclassical_hamiltonian(J_body, inertia, D=D_NV, hbar=HBAR, full_output=False):
    """3x3 spin Hamiltonian of an NV (axis n2) in a rotating symmetric body.

    Diagonal ``(D hbar - hbar J2/I, 0, D hbar + hbar J2/I)``; the ``|+1>,|0>``
    and ``|0>,|-1>`` elements are ``i hbar J1/(sqrt2 I) - hbar J3/(sqrt2 I3)``
    (and conjugates below the diagonal); the ``|+1>,|-1>`` element vanishes.
    For unequal ``I1, I2`` the mean ``I = (I1 + I2)/2`` is used and, with
    ``full_output=True``, the returned flag is set.
    """
    J1, J2, J3 = np.asarray(J_body, dtype=float)
    approximate = inertia.I1 != inertia.I2
    I = 0.5 * (inertia.I1 + inertia.I2)
    I3 = inertia.I3
    off = 1j * hbar * J1 / (SQRT2 * I) - hbar * J3 / (SQRT2 * I3)
    H = np.array([
        [D * hbar - hbar * J2 / I, off, 0.0],
        [np.conj(off), 0.0, off],
        [0.0, np.conj(off), D * hbar + hbar * J2 / I],
    ], dtype=complex)
    return (H, approximate) if full_output else H


def energy_gaps(J2, I, D=D_NV, hbar=HBAR):
    """Gaps ``(E_+1 - E_0, E_-1 - E_0) = (hbar (D - J2/I), hbar (D + J2/I))``."""
    return hbar * (D - J2 / I), hbar * (D + J2 / I)


def adiabatic_levels(J_body, inertia, D=D_NV, hbar=HBAR):
    """Eigenvalues and eigenvectors of the instantaneous Hamiltonian."""
    return np.linalg.eigh(semiclassical_hamiltonian(J_body, inertia, D, hbar))


# --- parametric propagation ------------------------------------------------

@dataclass
class SpinSeries:
    times: np.ndarray
    psi: np.ndarray
    hbar: float = HBAR
    norm_drift: float = 0.0

    @property
    def populations(self):
        return np.abs(self.psi) ** 2

    @property
    def expectations(self):
        return spin_expectations(self.psi, self.hbar)


def _frame_phases(t, D, Jf, I2):
    """Phases of |+1> and |-1> generated by the interaction-frame Hamiltonian."""
    return (D - Jf / I2) * t, (D + Jf / I2) * t


def evolve_spin_parametric(psi0, J_of_t, inertia, t_span, D=D_NV, hbar=HBAR, t_eval=None,
                           rel_tol=1e-10, abs_tol=1e-12, frame_J=None, max_step=np.inf):
    """Schrodinger evolution of the spin driven by a prescribed ``J_body(t)``.

    ``J_of_t`` is a callable returning the body-frame angular momentum, or a
    :class:`~spinrotor.dynamics.Trajectory` (interpolated by cubic splines).
    The spin does not act back on the rotor.  The state is never
    renormalized; a norm drift above ``1e-6`` raises :class:`SpinNormError`.
    """
    if hasattr(J_of_t, "J_body"):
        spline = CubicSpline(J_of_t.times, J_of_t.J_body, axis=0)
        J_fun = spline
    else:
        J_fun = J_of_t
    psi0 = psi0.c if isinstance(psi0, SpinAmplitudes) else np.asarray(psi0, dtype=complex)
    t0, t1 = map(float, t_span)
    Jf = float(np.linalg.norm(J_fun(t0))) if frame_J is None else float(frame_J)
    I1, I2, I3 = inertia.moments
    wa, wb = D - Jf / I2, D + Jf / I2

    def rhs(t, y):
        J1, J2, J3 = J_fun(t)
        phi = y[:3] + 1j * y[3:]
        d0 = (Jf - J2) / I2
        c = (1j * J1 / I1 - J3 / I3) / SQRT2
        u = c * np.exp(1j * wa * t)
        w = c * np.exp(-1j * wb * t)
        dphi = -1j * np.array([
            d0 * phi[0] + u * phi[1],
            np.conj(u) * phi[0] + w * phi[2],
            np.conj(w) * phi[1] - d0 * phi[2],
        ])
        return np.concatenate([dphi.real, dphi.imag])

    if t_eval is None:
        t_eval = sample_times(t0, t1)
    phi0 = psi0.copy()
    pa, pb = _frame_phases(t0, D, Jf, I2)
    phi0[0] *= np.exp(1j * pa)
    phi0[2] *= np.exp(1j * pb)
    sol = solve_ivp(rhs, (t0, t1), np.concatenate([phi0.real, phi0.imag]), method="DOP853",
                    t_eval=t_eval, rtol=rel_tol, atol=abs_tol, max_step=max_step)
    if sol.status != 0:
        raise IntegrationError(f"spin propagation failed: {sol.message}", float(sol.t[-1]) if len(sol.t) else t0)
    phi = (sol.y[:3] + 1j * sol.y[3:]).T
    pa, pb = _frame_phases(sol.t, D, Jf, I2)
    psi = phi.copy()
    psi[:, 0] *= np.exp(-1j * pa)
    psi[:, 2] *= np.exp(-1j * pb)
    drift = float(np.max(np.abs(np.sum(np.abs(psi) ** 2, axis=1) - 1.0)))
    if drift > NORM_TOL:
        raise SpinNormError(f"spin norm drifted by {drift:.3g}")
    return SpinSeries(sol.t, psi, hbar, drift)


# --- mean-field coupling ------------------------------------------------------

# params: I1 I2 I3 Jref D Jf N hbar | j0^2 | track_q | largest per-step norm error (written)
_MF_DRIFT = 10


@njit(cache=True, nogil=True, inline="always")
def _mf_core(t, y, p, out, o):
    I1, I2, I3, Jr, D, Jf, N, hb = p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7]
    J1, J2, J3 = y[o] * Jr, y[o + 1] * Jr, y[o + 2] * Jr
    a0, a1, a2 = y[o + 3], y[o + 4], y[o + 5]
    b0, b1, b2 = y[o + 6], y[o + 7], y[o + 8]
    ta = (D - Jf / I2) * t
    tb = (D + Jf / I2) * t
    ca, sa = np.cos(ta), np.sin(ta)
    cb, sb = np.cos(tb), np.sin(tb)

    # spin expectations in the Schrodinger picture, units of hbar
    # z01 = e^{i ta} conj(phi0) phi1 ; z12 = e^{-i tb} conj(phi1) phi2
    r01 = a0 * a1 + b0 * b1
    i01 = a0 * b1 - b0 * a1
    r12 = a1 * a2 + b1 * b2
    i12 = a1 * b2 - b1 * a2
    zr = ca * r01 - sa * i01 + cb * r12 + sb * i12
    zi = sa * r01 + ca * i01 + cb * i12 - sb * r12
    s1 = SQRT2 * zi
    s2 = a0 * a0 + b0 * b0 - a2 * a2 - b2 * b2
    s3 = SQRT2 * zr

    w0 = (J1 - N * hb * s1) / I1
    w1 = (J2 - N * hb * s2) / I2
    w2 = (J3 - N * hb * s3) / I3
    j0, j1, j2 = y[o], y[o + 1], y[o + 2]
    out[o] = j1 * w2 - j2 * w1
    out[o + 1] = j2 * w0 - j0 * w2
    out[o + 2] = j0 * w1 - j1 * w0

    # interaction-frame Schrodinger equation, H/hbar elements
    d0 = (Jf - J2) / I2
    cr = -J3 / (SQRT2 * I3)
    ci = J1 / (SQRT2 * I1)
    ur = cr * ca - ci * sa          # u = c e^{i ta}
    ui = cr * sa + ci * ca
    vr = cr * cb + ci * sb          # v = c e^{-i tb}
    vi = ci * cb - cr * sb
    # h phi
    h0r = d0 * a0 + ur * a1 - ui * b1
    h0i = d0 * b0 + ur * b1 + ui * a1
    h1r = ur * a0 + ui * b0 + vr * a2 - vi * b2
    h1i = ur * b0 - ui * a0 + vr * b2 + vi * a2
    h2r = vr * a1 + vi * b1 - d0 * a2
    h2i = vr * b1 - vi * a1 - d0 * b2
    # dphi = -i h phi
    out[o + 3] = h0i
    out[o + 4] = h1i
    out[o + 5] = h2i
    out[o + 6] = -h0r
    out[o + 7] = -h1r
    out[o + 8] = -h2r
    return w0, w1, w2


@njit(cache=True, nogil=True)
def _rhs_mf(t, y, p, out):
    _mf_core(t, y, p, out, 0)


@njit(cache=True, nogil=True)
def _rhs_mf_q(t, y, p, out):
    w0, w1, w2 = _mf_core(t, y, p, out, 4)
    qw, qx, qy, qz = y[0], y[1], y[2], y[3]
    out[0] = 0.5 * (-qx * w0 - qy * w1 - qz * w2)
    out[1] = 0.5 * (qw * w0 + qy * w2 - qz * w1)
    out[2] = 0.5 * (qw * w1 - qx * w2 + qz * w0)
    out[3] = 0.5 * (qw * w2 + qx * w1 - qy * w0)


@njit(cache=True, nogil=True)
def _post_mf(t, y, p):
    o = 4 if p[9] > 0 else 0
    if o:
        nq = np.sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3])
        for i in range(4):
            y[i] /= nq
    nrm = 0.0
    for i in range(6):
        nrm += y[o + 3 + i] * y[o + 3 + i]
    d = abs(nrm - 1.0)
    if d > p[_MF_DRIFT]:
        p[_MF_DRIFT] = d
    sc = 1.0 / np.sqrt(nrm)
    for i in range(6):
        y[o + 3 + i] *= sc
    return True


@dataclass
class MeanFieldResult:
    """Co-evolved rotor and spin; ``psi`` is in the Schrodinger picture."""

    times: np.ndarray
    J_body: np.ndarray
    q: np.ndarray
    psi: np.ndarray
    inertia: InertiaSpec
    n_spins: int = 1
    hbar: float = HBAR
    D: float = D_NV
    metadata: dict = field(default_factory=dict)

    @property
    def J(self):
        return np.linalg.norm(self.J_body, axis=1)

    @property
    def J2_over_J(self):
        return self.J_body[:, 1] / self.J

    @property
    def S_expect(self):
        """Total spin expectation ``N <S_k>`` [J s]."""
        return self.n_spins * spin_expectations(self.psi, self.hbar)

    @property
    def S2_over_hbar(self):
        return spin_expectations(self.psi, 1.0)[:, 1]

    def S2_rate(self):
        """Exact ``d<S2>/dt / hbar`` from ``i <[H, S2]> / hbar`` at each sample."""
        _, S2, _ = spin_operators(1.0)
        out = np.empty(len(self.times))
        for n, (J, psi) in enumerate(zip(self.J_body, self.psi)):
            H = _per_axis_hamiltonian(J, self.inertia, self.D, 1.0)
            out[n] = np.vdot(psi, (1j * (H @ S2 - S2 @ H)) @ psi).real
        return out

    def energy(self):
        """Conserved mean-field energy ``sum J_k^2/2I_k + N <H_spin>``."""
        E = np.sum(self.J_body ** 2 / (2 * self.inertia.moments), axis=1)
        for n, (J, psi) in enumerate(zip(self.J_body, self.psi)):
            H = _per_axis_hamiltonian(J, self.inertia, self.D, self.hbar)
            E[n] += self.n_spins * np.vdot(psi, H @ psi).real
        return E

    @property
    def J_space(self):
        from .dynamics import _quat_matrices
        return np.einsum("nij,nj->ni", _quat_matrices(self.q), self.J_body)

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MEANFIELD_COLUMNS)
        for row in zip(self.times, self.J2_over_J, self.S2_over_hbar):
            w.writerow([repr(float(x)) for x in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _per_axis_hamiltonian(J_body, inertia, D, hbar):
    S1, S2, S3 = spin_operators(hbar)
    I1, I2, I3 = inertia.moments
    return -J_body[0] * S1 / I1 - J_body[1] * S2 / I2 - J_body[2] * S3 / I3 + D * S2 @ S2 / hbar


def meanfield_initial_state(J, gamma_offset=1e-3):
    """Body-frame ``J`` for rotation about n2 with ``gamma = pi/2 + offset``, ``beta = pi/2``."""
    g = np.pi / 2 + gamma_offset
    return np.array([-J * np.cos(g), J * np.sin(g), 0.0])


def evolve_meanfield(state0, psi0, inertia, t_span, D=D_NV, hbar=HBAR, settings=None,
                     config=None, track_orientation=False, t_eval=None):
    """Co-integrate the rotor and an NV spin (axis n2) in mean-field coupling.

    The rotor follows the spin-coupled Euler equations with ``S_body``
    replaced by ``N <S>(t)``; the spin follows the semiclassical Hamiltonian
    (with per-axis moments) of the instantaneous ``J_body``.  ``config``
    may hold several NV centers provided their axes are parallel to n2 and
    they start in the same state; they then act as ``N`` identical copies.

    Raises
    ------
    UnsupportedSpinConfig
        For NV axes that are not parallel to n2 within 1e-3 rad.
    SpinNormError
        If a single step changes the spin norm by more than 1e-6.  Smaller
        per-step errors are removed by renormalization after every step.
    """
    settings = settings or IntegratorSettings()
    N = 1
    if config is not None:
        if config.N == 0:
            raise UnsupportedSpinConfig("mean-field evolution needs at least one NV center")
        if config.collective_s2() is None:
            raise UnsupportedSpinConfig(
                "resonant dynamics needs all NV axes parallel to n2 and a common initial state")
        N = config.N
    psi0 = psi0.c if isinstance(psi0, SpinAmplitudes) else np.asarray(psi0, dtype=complex)
    J0 = np.asarray(state0.J_body, dtype=float)
    Jref = float(np.linalg.norm(J0))
    if Jref == 0:
        raise ValueError("mean-field evolution needs a rotating body")
    t0, t1 = map(float, t_span)
    times = sample_times(t0, t1, settings.sample_interval) if t_eval is None else np.asarray(t_eval, float)

    p = np.zeros(11)
    p[0:3] = inertia.moments
    p[3] = Jref
    p[4] = D
    p[5] = Jref
    p[6] = N
    p[7] = hbar
    p[8] = 1.0
    p[9] = 1.0 if track_orientation else 0.0
    phi0 = psi0.copy()
    pa, pb = _frame_phases(t0, D, Jref, inertia.I2)
    phi0[0] *= np.exp(1j * pa)
    phi0[2] *= np.exp(1j * pb)
    y_spin = np.concatenate([J0 / Jref, phi0.real, phi0.imag])
    if track_orientation:
        y0 = np.concatenate([state0.orientation.q, y_spin])
        rhs = _rhs_mf_q
    else:
        y0 = y_spin
        rhs = _rhs_mf
    Y, status, t_reached, n_steps = _rk.solve(rhs, _post_mf, p, t0, y0, times, settings.rel_tol,
                                              settings.abs_tol, settings.max_step, settings.max_steps)
    if status != _rk.OK:
        raise IntegrationError("mean-field integration failed", t_reached)
    o = 4 if track_orientation else 0
    q = Y[:, :4] if track_orientation else np.full((len(times), 4), np.nan)
    J = Y[:, o:o + 3] * Jref
    phi = Y[:, o + 3:o + 6] + 1j * Y[:, o + 6:o + 9]
    pa, pb = _frame_phases(times, D, Jref, inertia.I2)
    psi = phi.copy()
    psi[:, 0] *= np.exp(-1j * pa)
    psi[:, 2] *= np.exp(-1j * pb)
    drift = float(p[_MF_DRIFT])
    if drift > NORM_TOL:
        raise SpinNormError(f"spin norm drifted by {drift:.3g}")
    meta = {"n_steps": int(n_steps), "max_step_norm_error": drift}
    return MeanFieldResult(times, J, q, psi, inertia, N, hbar, D, meta)


def time_avg_J2(times, J2, T0=DEFAULT_T0):
    """Trapezoidal average of ``J2(t)`` over ``[times[0], times[0] + T0]``."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(J2, dtype=float)
    if not T0 > 0:
        raise ValueError("T0 must be positive")
    end = t[0] + T0
    if t[-1] < end * (1 - 1e-12):
        raise ValueError("series shorter than the averaging window")
    k = t <= end * (1 + 1e-12)
    return float(trapezoid(y[k], t[k]) / (t[k][-1] - t[0]))


def resonance_scan(inertia, psi0, ratios, T0=DEFAULT_T0, gamma_offset=1e-3, D=D_NV, hbar=HBAR,
                   settings=None, n_samples=3001):
    """Time-averaged ``J2/J`` for rotation rates ``J = ratio * I2 * D``.

    Returns rows ``{"J_over_ID": ratio, "avgJ2_over_J": value}``.
    """
    from .rotor import Orientation
    rows = []
    t = np.linspace(0.0, T0, n_samples)
    for r in ratios:
        J = r * inertia.I2 * D
        st = RotorState(Orientation.identity(), meanfield_initial_state(J, gamma_offset))
        res = evolve_meanfield(st, psi0, inertia, (0.0, T0), D, hbar, settings, t_eval=t)
        rows.append({"J_over_ID": float(r), "avgJ2_over_J": time_avg_J2(t, res.J2_over_J, T0)})
    return rows


def scan_to_csv(rows, path=None):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_COLUMNS)
    for row in rows:
        w.writerow([repr(row[c]) for c in SCAN_COLUMNS])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
