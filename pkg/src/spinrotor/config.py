"""Scenario configuration: JSON parsing, validation and default filling.

A configuration is a JSON object.  Structural checks (unknown keys, missing
keys, types) go through a JSON schema; physical checks are done by building
the domain objects.  :func:`resolve` returns the canonical, defaults-filled
form; resolving a resolved document is the identity, so the echo written to
``resolved-config.json`` round-trips byte for byte.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from .constants import D_NV, DIAMOND_DENSITY, HBAR
from .dynamics import IntegratorSettings
from .rotor import InertiaSpec, InvalidGeometryError, ellipsoid_inertia
from .spin import NVConfig, rwa_effective_spin, rwa_validity

SCENARIOS = ("trajectory", "phase_portrait", "pendulum_compare", "thermal_ensemble", "resonance_scan")
TIME_UNITS = ("s", "rotation_period", "pendulum_period", "tau_sym")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key or invariant."""


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}
_vec3pos = {"type": "array", "items": _pos, "minItems": 3, "maxItems": 3}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


SCHEMA = _obj({
    "scenario": {"enum": list(SCENARIOS)},
    "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
    "geometry": _obj({
        "semiaxes": _vec3pos,
        "density": _pos,
        "moments": _vec3pos,
        "symmetry_tolerance": _pos,
    }),
    "spin": _obj({
        "nv_centers": {"type": "array", "items": _obj({
            "axis": _vec3,
            "s": {"enum": [-1, 0, 1]},
        }, required=("axis", "s"))},
        "S_body_hbar": _vec3,
    }),
    "drive": _obj({
        "axis": {"enum": [1, 2, 3]},
        "J": _pos,
        "J_over_hbar": _pos,
        "omega": _pos,
        "frequency_hz": _pos,
        "J_over_ID": _pos,
    }),
    "thermal": _obj({
        "T": {"type": "number", "minimum": 0},
        "n_samples": {"type": "integer", "minimum": 2},
    }, required=("T",)),
    "time": _obj({
        "duration": _pos,
        "unit": {"enum": list(TIME_UNITS)},
        "n_samples": {"type": "integer", "minimum": 2},
    }, required=("duration",)),
    "integrator": _obj({
        "rel_tol": _pos,
        "abs_tol": _pos,
        "max_step": _pos,
        "project_invariants": {"type": "boolean"},
        "max_steps": {"type": "integer", "minimum": 1},
    }),
    "output": _obj({
        "directory": {"type": "string", "minLength": 1},
        "formats": {"type": "array", "items": {"enum": ["csv", "json"]}, "uniqueItems": True},
    }),
    "trajectory": _obj({
        "model": {"enum": ["hard_magnet", "meanfield"]},
        "euler": _vec3,
        "gamma_offset": _num,
        "track_orientation": {"type": "boolean"},
    }),
    "phase_portrait": _obj({
        "spin_scale": {"type": "array", "items": _num, "minItems": 1},
        "n_curves": {"type": "integer", "minimum": 1},
    }),
    "pendulum_compare": _obj({
        "J3_over_J": _num,
        "S2_over_threshold": {"type": ["number", "null"]},
    }),
    "thermal_ensemble": _obj({
        "late_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
    }),
    "resonance_scan": _obj({
        "start": _pos,
        "stop": _pos,
        "num": {"type": "integer", "minimum": 1},
        "T0": _pos,
        "gamma_offset": _num,
    }),
    "derived": {"type": "object"},
}, required=("scenario", "geometry", "spin", "drive"))

DEFAULTS = {
    "seed": 0,
    "integrator": {"rel_tol": 1e-10, "abs_tol": 1e-12, "project_invariants": True},
    "output": {"directory": "spinrotor-out", "formats": ["csv", "json"]},
    "time": {"unit": "s", "n_samples": 1001},
    "trajectory": {"model": "hard_magnet", "gamma_offset": 1e-3, "track_orientation": True},
    "phase_portrait": {"spin_scale": [-1.0, 0.0, 1.0], "n_curves": 12},
    "pendulum_compare": {"J3_over_J": 1e-4, "S2_over_threshold": None},
    "thermal_ensemble": {"late_fraction": 0.5},
    "resonance_scan": {"start": 0.9, "stop": 1.1, "num": 21, "T0": 150e-6, "gamma_offset": 1e-3},
}

_DRIVE_KEYS = ("J", "J_over_hbar", "omega", "frequency_hz", "J_over_ID")


@dataclass
class ScenarioConfig:
    """Validated scenario with the derived physical objects attached."""

    raw: dict
    inertia: InertiaSpec
    S_body: np.ndarray
    nv: NVConfig | None
    J: float
    settings: IntegratorSettings

    @property
    def scenario(self):
        return self.raw["scenario"]

    @property
    def seed(self):
        return self.raw["seed"]

    def block(self, name):
        return self.raw.get(name, {})

    def resolved_text(self):
        return dump_config(self.raw)


def dump_config(doc):
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fail_invariant(what, exc):
    raise ConfigError(f"{what}: {exc}") from exc


def _schema_check(doc):
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {e.message}")


def _fill_defaults(doc):
    out = copy.deepcopy(doc)
    for key, val in DEFAULTS.items():
        if key in SCENARIOS and key != out["scenario"]:
            continue
        if isinstance(val, dict):
            merged = copy.deepcopy(val)
            merged.update(out.get(key, {}))
            if key == "time" and "duration" not in merged:
                continue
            out[key] = merged
        else:
            out.setdefault(key, val)
    return out


def _build_inertia(geom):
    has_axes = "semiaxes" in geom
    has_moments = "moments" in geom
    if has_axes == has_moments:
        raise ConfigError("geometry: give exactly one of 'semiaxes' or 'moments'")
    if has_moments and "density" in geom:
        raise ConfigError("geometry: 'density' only applies together with 'semiaxes'")
    tol = geom.get("symmetry_tolerance", 0.1)
    try:
        if has_axes:
            a, b, c = geom["semiaxes"]
            return ellipsoid_inertia(a, b, c, geom["density"], symmetry_tolerance=tol)
        return InertiaSpec(*geom["moments"], symmetry_tolerance=tol)
    except InvalidGeometryError as exc:
        _fail_invariant("geometry violates rotor invariants", exc)


def _build_spin(spin):
    if ("nv_centers" in spin) == ("S_body_hbar" in spin):
        raise ConfigError("spin: give exactly one of 'nv_centers' or 'S_body_hbar'")
    if "nv_centers" in spin:
        try:
            nv = NVConfig(tuple(spin["nv_centers"]))
        except ValueError as exc:
            _fail_invariant("spin.nv_centers", exc)
        return nv, rwa_effective_spin(nv).S_body.copy()
    return None, np.asarray(spin["S_body_hbar"], dtype=float) * HBAR


def _drive_J(drive, inertia):
    axis = drive.get("axis", 2)
    I_axis = inertia.moments[axis - 1]
    given = [k for k in _DRIVE_KEYS if k in drive]
    if not given:
        raise ConfigError("drive: one of " + ", ".join(repr(k) for k in _DRIVE_KEYS) + " is required")
    vals = {
        "J": lambda v: v,
        "J_over_hbar": lambda v: v * HBAR,
        "omega": lambda v: I_axis * v,
        "frequency_hz": lambda v: I_axis * 2 * np.pi * v,
        "J_over_ID": lambda v: v * I_axis * D_NV,
    }
    Js = [vals[k](drive[k]) for k in given]
    if len(given) > 1 and "J" in given:
        # a resolved config records J next to the rate it was derived from
        others = [vals[k](drive[k]) for k in given if k != "J"]
        if len(others) > 1 or abs(others[0] - drive["J"]) > 1e-12 * drive["J"]:
            raise ConfigError("drive: inconsistent rotation specifications " + ", ".join(given))
        return drive["J"]
    if len(given) > 1:
        raise ConfigError("drive: give one rotation specification, got " + ", ".join(given))
    return Js[0]


def resolve(doc):
    """Validate ``doc`` and return a :class:`ScenarioConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>: configuration must be a JSON object")
    _schema_check(doc)
    for name in SCENARIOS:
        if name in doc and name != doc["scenario"]:
            raise ConfigError(f"{name}: block only valid for scenario '{name}'")
    raw = _fill_defaults(doc)
    raw.pop("derived", None)
    if "semiaxes" in raw["geometry"]:
        raw["geometry"].setdefault("density", DIAMOND_DENSITY)
    raw["drive"].setdefault("axis", 2)
    inertia = _build_inertia(raw["geometry"])
    nv, S_body = _build_spin(raw["spin"])
    J = _drive_J(raw["drive"], inertia)
    raw["drive"]["J"] = J
    if "time" not in raw and raw["scenario"] != "resonance_scan":
        raise ConfigError("time: required for scenario " + raw["scenario"])
    if raw["scenario"] == "thermal_ensemble":
        if "thermal" not in raw:
            raise ConfigError("thermal: required for scenario thermal_ensemble")
        if raw["drive"]["axis"] != 2:
            raise ConfigError("drive.axis: the thermal state is displaced along n2 (axis 2)")
    if "thermal" in raw:
        raw["thermal"].setdefault("n_samples", 1000)
    if raw.get("time", {}).get("unit") == "tau_sym" and "thermal" not in raw:
        raise ConfigError("time.unit: 'tau_sym' needs a thermal block")
    if raw["scenario"] == "resonance_scan" or raw.get("trajectory", {}).get("model") == "meanfield":
        if nv is not None and nv.collective_s2() is None:
            raise ConfigError("spin.nv_centers: resonant dynamics needs NV axes parallel to n2")
        if nv is None:
            s1, s2, s3 = raw["spin"]["S_body_hbar"]
            if s1 != 0 or s3 != 0 or s2 not in (-1, 0, 1):
                raise ConfigError("spin.S_body_hbar: resonant dynamics needs one spin-1 along n2, "
                                  "i.e. [0, s, 0] with s in {-1, 0, 1}")
    try:
        settings = IntegratorSettings(**raw["integrator"])
    except ValueError as exc:
        _fail_invariant("integrator", exc)
    n_spins = nv.N if nv is not None else 1
    raw["derived"] = {
        "moments": [float(x) for x in inertia.moments],
        "rotor_class": inertia.rotor_class.value,
        "S_body": [float(x) for x in S_body],
        "regime": rwa_validity(J, inertia, max(n_spins, 1)).value,
    }
    return ScenarioConfig(raw, inertia, S_body, nv, J, settings)


def parse_config(text):
    """Parse a UTF-8 JSON document into a validated :class:`ScenarioConfig`."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"<root>: not valid JSON ({exc})") from exc
    return resolve(doc)


def load_config(path):
    with open(path, "rb") as fh:
        return parse_config(fh.read())


def set_path(doc, path, value):
    """Set ``doc[a][b]...`` for a dotted ``path``; list indices are integers."""
    keys = path.split(".")
    node = doc
    for k in keys[:-1]:
        node = node[int(k)] if isinstance(node, list) else node.setdefault(k, {})
    last = keys[-1]
    if isinstance(node, list):
        node[int(last)] = value
    else:
        node[last] = value
    return doc
