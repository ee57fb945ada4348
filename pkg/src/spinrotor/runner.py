"""Scenario execution, sweeps and artifact bookkeeping."""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, resolve, set_path
from .constants import HBAR
from .dynamics import IntegrationError, integrate_hard_magnet
from .ensemble import EnsembleError, ThermalSpec, ensemble_alignment, fit_gaussian_decay
from .pendulum import (
    PendulumParams,
    effective_potential,
    integrate_pendulum,
    sampled_minimum,
    small_oscillation_frequency,
    tau_sym,
    thermal_bound,
    threshold_sym,
    turning_point_singamma,
)
from .rotor import Orientation, RotorState
from .spin import (
    SpinAmplitudes,
    SpinNormError,
    evolve_meanfield,
    meanfield_initial_state,
    resonance_scan,
    scan_to_csv,
    time_avg_J2,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTEGRATION = 3
EXIT_PARTIAL = 4

FAILURES = (IntegrationError, EnsembleError, SpinNormError)


class ArtifactWriter:
    """Writes files below ``root`` and records their SHA-256 for the manifest.

    All writes are serialized through one lock so sweep points may run on
    several threads.
    """

    def __init__(self, root):
        self.root = os.path.abspath(root)
        self.files = {}
        self._lock = threading.Lock()
        os.makedirs(self.root, exist_ok=True)

    def write_text(self, relpath, text):
        data = text.encode("utf-8")
        path = os.path.join(self.root, relpath)
        with self._lock:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            with open(path, "wb") as fh:
                fh.write(data)
            self.files[relpath.replace(os.sep, "/")] = hashlib.sha256(data).hexdigest()
        return path

    def write_json(self, relpath, obj):
        return self.write_text(relpath, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def write_manifest(self, name="manifest.json"):
        with self._lock:
            entries = [{"path": p, "sha256": h} for p, h in sorted(self.files.items())]
        path = os.path.join(self.root, name)
        with open(path, "w") as fh:
            fh.write(json.dumps({"files": entries}, indent=2, sort_keys=True) + "\n")
        return path


def _clean(value):
    """JSON-safe scalar: non-finite floats become None."""
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def _csv_table(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


# --- helpers ---------------------------------------------------------------

def duration_seconds(cfg):
    tb = cfg.block("time")
    unit = tb.get("unit", "s")
    d = tb["duration"]
    if unit == "s":
        return d
    if unit == "rotation_period":
        I_axis = cfg.inertia.moments[cfg.raw["drive"]["axis"] - 1]
        return d * 2 * np.pi * I_axis / cfg.J
    if unit == "pendulum_period":
        w0 = small_oscillation_frequency(PendulumParams.from_inertia(cfg.inertia, cfg.S_body[1], cfg.J))
        if not np.isfinite(w0):
            raise ConfigError("time.unit: no small oscillations about gamma = pi/2 for this spin")
        return d * 2 * np.pi / w0
    T = cfg.raw["thermal"]["T"]
    return d * tau_sym(cfg.inertia.I1, cfg.inertia.I3, T)


def _times(cfg):
    return np.linspace(0.0, duration_seconds(cfg), cfg.block("time")["n_samples"])


def _initial_state(cfg, block):
    if "euler" in block:
        return RotorState.from_euler(cfg.J, *block["euler"])
    axis = cfg.raw["drive"]["axis"]
    off = block.get("gamma_offset", 0.0)
    if axis == 2:
        return RotorState.from_euler(cfg.J, 0.0, np.pi / 2, np.pi / 2 + off)
    if axis == 1:
        return RotorState.from_euler(cfg.J, 0.0, np.pi / 2, np.pi + off)
    return RotorState.from_euler(cfg.J, 0.0, off, 0.0)


def _spin_state(cfg):
    if cfg.nv is not None:
        s = cfg.nv.collective_s2()
    else:
        s = int(round(cfg.S_body[1] / HBAR))
    return SpinAmplitudes.basis(s)


def fibonacci_directions(n):
    """``n`` roughly uniform unit vectors on the sphere."""
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + 5 ** 0.5) * k
    r = np.sqrt(1 - z * z)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


# --- scenarios -------------------------------------------------------------

def _run_trajectory(cfg, out, prefix, threads):
    block = cfg.block("trajectory")
    t = _times(cfg)
    formats = cfg.raw["output"]["formats"]
    if block["model"] == "meanfield":
        state = _initial_state(cfg, block)
        if "euler" not in block and cfg.raw["drive"]["axis"] == 2:
            state = RotorState(Orientation.identity(), meanfield_initial_state(cfg.J, block["gamma_offset"]))
        res = evolve_meanfield(state, _spin_state(cfg), cfg.inertia, (t[0], t[-1]),
                               settings=cfg.settings, config=cfg.nv,
                               track_orientation=block["track_orientation"], t_eval=t)
        if "csv" in formats:
            out.write_text(prefix + "meanfield.csv", res.to_csv())
        summary = {
            "avgJ2_over_J": time_avg_J2(t, res.J2_over_J, t[-1] - t[0]),
            "min_J2_over_J": float(res.J2_over_J.min()),
            "min_S2_over_hbar": float(res.S2_over_hbar.min()),
            "max_S2_over_hbar": float(res.S2_over_hbar.max()),
            "n_steps": res.metadata["n_steps"],
        }
        if block["track_orientation"]:
            Js = res.J_space
            summary["J_space_drift"] = float(np.max(np.linalg.norm(Js - Js[0], axis=1)) / np.linalg.norm(Js[0]))
        return summary
    state = _initial_state(cfg, block)
    tr = integrate_hard_magnet(state, cfg.S_body, cfg.inertia, (t[0], t[-1]), cfg.settings,
                               track_orientation=block["track_orientation"], t_eval=t)
    if "csv" in formats:
        out.write_text(prefix + "trajectory.csv", tr.to_csv())
    E = tr.energy
    proxy = tr.alignment().proxy
    summary = {
        "J_drift": float(np.max(np.abs(tr.J - tr.J[0])) / tr.J[0]),
        "energy_drift": float(np.max(np.abs(E - E[0])) / abs(E[0])) if E[0] else None,
        "final_align_proxy": float(proxy[-1]),
        "min_align_proxy": float(proxy.min()),
        "n_steps": tr.metadata["n_steps"],
    }
    if tr.has_orientation:
        Js = tr.J_space
        summary["J_space_drift"] = float(np.max(np.linalg.norm(Js - Js[0], axis=1)) / np.linalg.norm(Js[0]))
    return summary


def _run_phase_portrait(cfg, out, prefix, threads):
    block = cfg.block("phase_portrait")
    t = _times(cfg)
    dirs = fibonacci_directions(block["n_curves"])
    settings = cfg.settings
    drift = 0.0
    csv_out = "csv" in cfg.raw["output"]["formats"]
    for k, scale in enumerate(block["spin_scale"]):
        S = scale * cfg.S_body
        rows = []
        for c, d in enumerate(dirs):
            tr = integrate_hard_magnet(RotorState(Orientation.identity(), cfg.J * d), S, cfg.inertia,
                                       (t[0], t[-1]), settings, track_orientation=False, t_eval=t)
            Jn = tr.J_body / cfg.J
            drift = max(drift, float(np.max(np.abs(tr.J / cfg.J - 1))))
            rows.extend((c, tt, *j) for tt, j in zip(t, Jn))
        if csv_out:
            out.write_text(prefix + f"phase_portrait_{k:02d}.csv",
                           _csv_table(("curve", "t", "J1_over_J", "J2_over_J", "J3_over_J"), rows))
    if csv_out and cfg.inertia.rotor_class.value != "Generic":
        g = np.linspace(0, 2 * np.pi, 361)
        cols = ["gamma"] + [f"V_{k:02d}" for k in range(len(block["spin_scale"]))]
        V = [effective_potential(g, PendulumParams.from_inertia(cfg.inertia, s * cfg.S_body[1], cfg.J))
             for s in block["spin_scale"]]
        out.write_text(prefix + "potential.csv", _csv_table(cols, zip(g, *V)))
    return {"n_curves": block["n_curves"], "n_spin_values": len(block["spin_scale"]), "max_J_drift": drift}


def _run_pendulum_compare(cfg, out, prefix, threads):
    block = cfg.block("pendulum_compare")
    inertia = cfg.inertia
    J = cfg.J
    p0 = block["J3_over_J"] * J
    S = cfg.S_body.copy()
    thr = threshold_sym(p0, inertia.I1, inertia.I3, J)
    if block["S2_over_threshold"] is not None:
        if not thr > 0:
            raise ConfigError("pendulum_compare.S2_over_threshold: threshold vanishes (J3_over_J = 0 or I = I3)")
        S[1] = block["S2_over_threshold"] * thr
    prm = PendulumParams.from_inertia(inertia, S[1], J)
    t = _times(cfg)
    J_body = np.array([0.0, np.sqrt(J * J - p0 * p0), p0])
    tr = integrate_hard_magnet(RotorState(Orientation.identity(), J_body), S, inertia, (t[0], t[-1]),
                               cfg.settings, track_orientation=False, t_eval=t)
    pt = integrate_pendulum(np.pi / 2, p0, prm, (t[0], t[-1]), cfg.settings, t_eval=t)
    g_full = np.unwrap(tr.gamma)
    err = np.abs(g_full - pt.gamma)
    if "csv" in cfg.raw["output"]["formats"]:
        out.write_text(prefix + "pendulum_compare.csv",
                       _csv_table(("t", "gamma_full", "gamma_pendulum", "abs_error"),
                                  zip(t, g_full, pt.gamma, err)))
    tp = turning_point_singamma(p0, prm)
    return {
        "S2": float(S[1]),
        "S2_over_threshold": float(S[1] / thr) if thr > 0 else None,
        "singamma_min_predicted": tp.singamma_min,
        "singamma_min_measured": sampled_minimum(t, np.sin(tr.gamma)),
        "trapped_flag": int(tp.trapped and tp.raw >= 0.8),
        "max_abs_error": float(err.max()),
        "small_oscillation_frequency": small_oscillation_frequency(prm),
    }


def _run_thermal(cfg, out, prefix, threads):
    th = cfg.raw["thermal"]
    spec = ThermalSpec(th["T"], cfg.J, cfg.inertia, seed=cfg.seed, n_samples=th["n_samples"])
    t = _times(cfg)
    res = ensemble_alignment(spec, cfg.S_body, (t[0], t[-1]), settings=cfg.settings, threads=threads, t_eval=t)
    fmts = cfg.raw["output"]["formats"]
    if "csv" in fmts:
        out.write_text(prefix + "ensemble.csv", res.to_csv())
    I, I3 = cfg.inertia.I1, cfg.inertia.I3
    tau_pred = tau_sym(I, I3, th["T"]) if th["T"] > 0 and I != I3 else None
    fit = fit_gaussian_decay(res.times, res.mean)
    S2 = cfg.S_body[1]
    return {
        "tau_fit": fit.tau,
        "tau_sym": tau_pred,
        "ratio": fit.tau / tau_pred if tau_pred and np.isfinite(fit.tau) else None,
        "r_squared": fit.r_squared,
        "decays": fit.decays,
        "initial_mean": float(res.mean[0]),
        "min_mean": float(res.mean.min()),
        "late_mean": res.late_mean(cfg.block("thermal_ensemble")["late_fraction"]),
        "T": th["T"],
        "T_max": thermal_bound(S2, cfg.J, I, I3) if S2 > 0 and I > I3 else None,
        "n_samples": spec.n_samples,
    }


def _run_resonance(cfg, out, prefix, threads):
    block = cfg.block("resonance_scan")
    ratios = np.linspace(block["start"], block["stop"], block["num"])
    psi0 = _spin_state(cfg)
    settings = cfg.settings

    def point(r):
        return resonance_scan(cfg.inertia, psi0, [r], block["T0"], block["gamma_offset"], settings=settings)[0]

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(point, ratios))
    else:
        rows = [point(r) for r in ratios]
    if "csv" in cfg.raw["output"]["formats"]:
        out.write_text(prefix + "resonance_scan.csv", scan_to_csv(rows))
    vals = np.array([r["avgJ2_over_J"] for r in rows])
    i = int(np.argmin(vals))
    return {"min_avgJ2_over_J": float(vals[i]), "J_over_ID_at_min": float(ratios[i]),
            "max_avgJ2_over_J": float(vals.max()), "n_points": len(rows)}


_DISPATCH = {
    "trajectory": _run_trajectory,
    "phase_portrait": _run_phase_portrait,
    "pendulum_compare": _run_pendulum_compare,
    "thermal_ensemble": _run_thermal,
    "resonance_scan": _run_resonance,
}


@dataclass
class RunResult:
    scenario: str
    summary: dict
    out_dir: str
    files: dict


def execute(cfg, out, prefix="", threads=1):
    """Run ``cfg`` writing through ``out``; returns the cleaned summary."""
    summary = _DISPATCH[cfg.scenario](cfg, out, prefix, threads)
    summary = {k: _clean(v) for k, v in summary.items()}
    summary["scenario"] = cfg.scenario
    summary["seed"] = cfg.seed
    out.write_text(prefix + "resolved-config.json", cfg.resolved_text())
    if "json" in cfg.raw["output"]["formats"]:
        out.write_json(prefix + "summary.json", summary)
    return summary


def run_scenario(cfg, out_dir=None, seed=None, threads=1):
    """Run one scenario; writes artifacts and ``manifest.json`` into ``out_dir``."""
    if seed is not None:
        doc = copy.deepcopy(cfg.raw)
        doc["seed"] = int(seed)
        cfg = resolve(doc)
    out_dir = out_dir or cfg.raw["output"]["directory"]
    out = ArtifactWriter(out_dir)
    try:
        summary = execute(cfg, out, threads=threads)
    finally:
        out.write_manifest()
    return RunResult(cfg.scenario, summary, out.root, dict(out.files))


# --- sweeps ------------------------------------------------------------------

def parse_grid(spec):
    """Grid from ``"a,b,c"``, ``"linspace:start:stop:num"`` or ``"geomspace:start:stop:num"``."""
    spec = spec.strip()
    if not spec:
        raise ConfigError("grid: empty grid")
    if spec.startswith(("linspace:", "geomspace:")):
        kind, *args = spec.split(":")
        if len(args) != 3:
            raise ConfigError(f"grid: '{kind}' needs start:stop:num")
        try:
            a, b, n = float(args[0]), float(args[1]), int(args[2])
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc
        if n < 1:
            raise ConfigError("grid: empty grid")
        try:
            return [float(x) for x in getattr(np, kind)(a, b, n)]
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from exc
    try:
        vals = [json.loads(x) for x in spec.split(",") if x.strip()]
    except json.JSONDecodeError as exc:
        raise ConfigError(f"grid: cannot parse value ({exc})") from exc
    if not vals:
        raise ConfigError("grid: empty grid")
    return vals


@dataclass
class SweepResult:
    rows: list
    n_failed: int
    out_dir: str

    @property
    def exit_code(self):
        return EXIT_PARTIAL if self.n_failed else EXIT_OK


def sweep(doc, param, grid, out_dir=None, seed=None, threads=1):
    """Run the scenario once per grid value of the dotted ``param`` path.

    Writes ``point_NNN/`` subdirectories, ``sweep.csv`` (one row per grid
    point, in grid order) and a manifest covering every file.  Failed points
    are recorded with their exit code and the sweep continues.
    """
    if not grid:
        raise ConfigError("grid: empty grid")
    base = copy.deepcopy(doc)
    base.pop("derived", None)
    if seed is not None:
        base["seed"] = int(seed)
    base_cfg = resolve(copy.deepcopy(base))
    out = ArtifactWriter(out_dir or base_cfg.raw["output"]["directory"])

    def point(item):
        i, value = item
        d = set_path(copy.deepcopy(base), param, value)
        try:
            cfg = resolve(d)
            summary = execute(cfg, out, prefix=f"point_{i:03d}/", threads=1)
            return {"value": value, "status": "ok", "exit_code": EXIT_OK, **summary}
        except ConfigError as exc:
            return {"value": value, "status": "config_error", "exit_code": EXIT_CONFIG, "error": str(exc)}
        except FAILURES as exc:
            return {"value": value, "status": "integration_failure", "exit_code": EXIT_INTEGRATION,
                    "error": str(exc)}

    items = list(enumerate(grid))
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(point, items))
    else:
        rows = [point(it) for it in items]

    fixed = ["value", "status", "exit_code"]
    extra = sorted({k for r in rows for k in r} - set(fixed) - {"error"})
    cols = fixed + extra + ["error"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([param if c == "value" else c for c in cols])
    for r in rows:
        cells = []
        for c in cols:
            v = r.get(c, "")
            if v is None:
                v = ""
            elif isinstance(v, float):
                v = repr(v)
            cells.append(v)
        w.writerow(cells)
    out.write_text("sweep.csv", buf.getvalue())
    out.write_manifest()
    n_failed = sum(r["status"] != "ok" for r in rows)
    return SweepResult(rows, n_failed, out.root)
