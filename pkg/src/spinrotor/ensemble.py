"""Monte Carlo ensembles of a displaced thermal rotor state.

The initial state is Gaussian in the body-frame angular momentum,

    J1 ~ N(0, I1 kB T),  J2 ~ N(J_drive, I2 kB T),  J3 ~ N(0, I3 kB T),

with the body axes aligned to the space axes (zero orientation width).  Each
sample is propagated with :func:`integrate_hard_magnet` and the ensemble mean
of the alignment proxy ``J2 / |J|`` is recorded.

Random numbers come from a counter-based generator: sample ``i`` draws from
``Philox(key=seed, counter=[0, 0, i, 0])``, so every sample is reproducible
on its own and results do not depend on evaluation order or thread count.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import least_squares

from .constants import KB
from .dynamics import IntegrationError, IntegratorSettings, integrate_hard_magnet
from .rotor import InertiaSpec, Orientation, RotorState

ENSEMBLE_COLUMNS = ("t", "mean_align", "stderr", "n_samples")

# J_drive / max thermal width below which the displaced state is not "narrow"
NARROW_MARGIN = 10.0


class EnsembleError(RuntimeError):
    """An ensemble member failed; ``sample_index`` identifies it."""

    def __init__(self, sample_index, cause):
        super().__init__(f"sample {sample_index}: {cause}")
        self.sample_index = sample_index
        self.cause = cause


@dataclass(frozen=True)
class ThermalSpec:
    """Displaced thermal state.

    Attributes
    ----------
    T : float
        Temperature [K].
    J_drive : float
        Mean angular momentum along n2 [J s].
    inertia : InertiaSpec
    seed : int
        Master seed (64-bit).
    n_samples : int
    kB : float
    """

    T: float
    J_drive: float
    inertia: InertiaSpec
    seed: int = 0
    n_samples: int = 1000
    kB: float = KB

    def __post_init__(self):
        if self.T < 0:
            raise ValueError("temperature must be non-negative")
        if self.n_samples < 2:
            raise ValueError("n_samples must be at least 2")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.width_margin < NARROW_MARGIN:
            warnings.warn(
                f"J_drive is only {self.width_margin:.3g} thermal widths; "
                "the displaced state is not narrow", RuntimeWarning, stacklevel=3)

    @property
    def widths(self):
        """Thermal standard deviations ``sqrt(I_k kB T)``."""
        return np.sqrt(self.inertia.moments * self.kB * self.T)

    @property
    def width_margin(self):
        w = self.widths.max()
        return np.inf if w == 0 else abs(self.J_drive) / w


def sample_generator(seed, index):
    """Independent generator for sample ``index`` of master ``seed``."""
    return np.random.Generator(np.random.Philox(key=int(seed), counter=[0, 0, int(index), 0]))


def sample_J(spec, index):
    z = sample_generator(spec.seed, index).standard_normal(3)
    return np.array([0.0, spec.J_drive, 0.0]) + spec.widths * z


def sample_initial_states(spec):
    """All ``spec.n_samples`` initial states, in sample-index order."""
    ident = Orientation.identity()
    return [RotorState(ident, sample_J(spec, i)) for i in range(spec.n_samples)]


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n_samples: int
    samples: np.ndarray | None = None

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(ENSEMBLE_COLUMNS)
        for t, m, s in zip(self.times, self.mean, self.stderr):
            w.writerow([repr(float(t)), repr(float(m)), repr(float(s)), self.n_samples])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def late_mean(self, fraction=0.5):
        """Time average of the ensemble mean over the last ``fraction`` of the run."""
        k = int(len(self.times) * (1 - fraction))
        return float(trapezoid(self.mean[k:], self.times[k:]) / (self.times[-1] - self.times[k]))


def _run_one(spec, index, S_body, times, settings):
    state = RotorState(Orientation.identity(), sample_J(spec, index))
    try:
        tr = integrate_hard_magnet(state, S_body, spec.inertia, (times[0], times[-1]),
                                   settings, track_orientation=False, t_eval=times)
    except IntegrationError as exc:
        raise EnsembleError(index, exc) from exc
    J = tr.J_body
    return J[:, 1] / np.linalg.norm(J, axis=1)


def ensemble_alignment(spec, S_body, t_span, n_times=401, settings=None, threads=1,
                       keep_samples=False, t_eval=None):
    """Ensemble mean and standard error of ``J2/|J|`` on a uniform time grid.

    Samples may run on ``threads`` worker threads (the compiled integrator
    releases the GIL); the reduction is done in sample-index order so the
    output is bit-identical for any thread count.
    """
    settings = settings or IntegratorSettings()
    times = np.linspace(t_span[0], t_span[1], n_times) if t_eval is None else np.asarray(t_eval, float)
    S_body = np.asarray(S_body, dtype=float)
    n = spec.n_samples

    def job(i):
        return _run_one(spec, i, S_body, times, settings)

    if threads is None or threads <= 1:
        rows = [job(i) for i in range(n)]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            rows = list(pool.map(job, range(n)))
    A = np.vstack(rows)
    mean = A.mean(axis=0)
    stderr = A.std(axis=0, ddof=1) / np.sqrt(n)
    return EnsembleResult(times, mean, stderr, n, A if keep_samples else None)


@dataclass(frozen=True)
class GaussianFit:
    tau: float
    r_squared: float
    decays: bool
    n_points: int


def fit_gaussian_decay(times, series, floor=0.2):
    """Fit ``exp(-t^2 / (2 tau^2))`` to a decaying series.

    Only the leading window where ``series >= floor`` is used.  A series
    that never falls below ``exp(-1/2)`` (i.e. never reaches ``t = tau``)
    is reported as non-decaying with ``tau = inf``.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(series, dtype=float)
    if len(t) != len(y) or len(t) < 3:
        raise ValueError("need at least three matching samples")
    if np.min(y) > np.exp(-0.5):
        return GaussianFit(np.inf, float("nan"), False, 0)
    below = np.nonzero(y < floor)[0]
    end = below[0] if len(below) else len(y)
    t, y = t[:end], y[:end]
    # start from the log-linear estimate, ignoring non-positive and t=0 points
    ok = (y > 0) & (y < 1) & (t != 0)
    if ok.sum() >= 1:
        inv = np.sum(-2 * np.log(y[ok]) * t[ok] ** 2) / np.sum(t[ok] ** 4)
        tau0 = 1 / np.sqrt(inv) if inv > 0 else t[-1]
    else:
        tau0 = t[-1]

    def resid(x):
        return np.exp(-t * t / (2 * x[0] ** 2)) - y

    sol = least_squares(resid, [tau0], x_scale=[tau0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    tau = abs(float(sol.x[0]))
    ss_res = float(np.sum(sol.fun ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    return GaussianFit(tau, r2, True, len(t))


def ensemble_summary(result, tau_pred):
    fit = fit_gaussian_decay(result.times, result.mean)
    return {
        "tau_fit": fit.tau if np.isfinite(fit.tau) else None,
        "tau_sym": tau_pred,
        "ratio": fit.tau / tau_pred if np.isfinite(fit.tau) else None,
        "r_squared": fit.r_squared if np.isfinite(fit.r_squared) else None,
        "decays": fit.decays,
        "n_samples": result.n_samples,
    }


def summary_to_json(summary, path=None):
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
