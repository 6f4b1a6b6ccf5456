"""YAML run configuration: strict schema, unit suffixes, overrides.

Unknown keys are rejected with the offending path and line. Quantities
with physical dimension accept a quoted string with a unit suffix
("0.526 ps", "10 mK", "1 um") or a bare number in SI units.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field, fields, replace

import yaml

from .coefficients import PhysicalParams, derive_coefficients
from .errors import ConfigError
from .lattice import NumericsConfig, QuasilinearConfig, RunSetup
from .thermo import ErrorModel, QecPolicy

_TIME_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6, "µs": 1e-6,
               "ns": 1e-9, "ps": 1e-12, "fs": 1e-15}
_LENGTH_UNITS = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9}
_TEMP_UNITS = {"K": 1.0, "mK": 1e-3, "uK": 1e-6, "µK": 1e-6}
_UNIT_TABLES = {"time": _TIME_UNITS, "length": _LENGTH_UNITS,
                "temperature": _TEMP_UNITS}

# leaf spec: (kind, unit dimension or None)
_SCHEMA = {
    "physical": {
        "lambda_mfp": ("float", "length"),
        "sound_speed": ("float", None),
        "lattice_spacing": ("float", "length"),
        "time_step": ("float", "time"),
        "debye_temp": ("float", "temperature"),
        "atom_count": ("float", None),
        "cooling_power_coeff": ("float", None),
        "base_temp": ("float", "temperature"),
        "n_ancilla": ("float", None),
        "n_cooled_sites": ("int", None),
        "n_fridge_neighbors": ("int", None),
        "dimension": ("int", None),
        "num_sites": ("int", None),
        "heating_ln2": ("bool", None),
        "end_placement": ("bool", None),
    },
    "error_model": {
        "p0": ("float", None),
        "tls_B": ("float", None),
        "tls_n": ("float", None),
        "qp_amplitude": ("float", None),
        "qp_gap": ("float", None),
    },
    "qec": {
        "p_th": ("float", None),
        "code_distance": ("int", None),
        "c_f": ("float", None),
    },
    "coefficients": {
        "alpha": ("float_or_null", None),
        "gamma": ("float_or_null", None),
        "delta": ("float_or_null", None),
        "debye_A": ("float_or_null", None),
        "diffusivity": ("float_or_null", None),
    },
    "numerics": {
        "max_steps": ("int_or_null", None),
        "max_seconds": ("float_or_null", "time"),
        "sampling_stride": ("int", None),
        "plateau_window_samples": ("int", None),
        "plateau_rel_tol": ("float", None),
        "debounce_window": ("int", None),
        "quasilinear": {
            "enabled": ("bool", None),
            "slope_rel_tol": ("float", None),
            "events_per_window": ("float", None),
            "min_window_steps": ("int", None),
            "max_window_steps": ("int", None),
            "stable_windows": ("int", None),
            "jump_frac": ("float", None),
            "max_burst_windows": ("int", None),
            "balance_tol": ("float", None),
        },
    },
    "outputs": {
        "trajectory": ("str_or_null", None),
        "outcome": ("str_or_null", None),
        "grid": ("str_or_null", None),
        "matrix": ("str_or_null", None),
        "journal": ("str_or_null", None),
    },
}

_LINES_KEY = "__lines__"


class _MarkedLoader(yaml.SafeLoader):
    """SafeLoader that stamps each mapping with its keys' line numbers."""


def _construct_marked_map(loader, node):
    data = {}
    yield data
    data.update(loader.construct_mapping(node, deep=True))
    data[_LINES_KEY] = {getattr(kn, "value", "?"): kn.start_mark.line + 1
                        for kn, _ in node.value}


_MarkedLoader.add_constructor("tag:yaml.org,2002:map", _construct_marked_map)

_UNIT_RE = re.compile(r"^\s*([-+]?[0-9.][-+0-9.eE]*)\s*([a-zA-Zµ]+)\s*$")


def _parse_unit(raw: str, dimension: str, path: str, line) -> float:
    m = _UNIT_RE.match(raw)
    table = _UNIT_TABLES[dimension]
    if not m:
        raise ConfigError(
            f"cannot parse {raw!r} as a {dimension} quantity; write a bare "
            f"SI number or '<number> <unit>' with unit in "
            f"{sorted(set(table))}", path=path, line=line)
    num, suffix = m.groups()
    if suffix not in table:
        raise ConfigError(
            f"unknown {dimension} unit {suffix!r}; expected one of "
            f"{sorted(set(table))}", path=path, line=line)
    try:
        value = float(num)
    except ValueError:
        raise ConfigError(f"bad number {num!r}", path=path, line=line)
    return value * table[suffix]


def _coerce(raw, kind: str, unit, path: str, line):
    if raw is None:
        if kind.endswith("_or_null"):
            return None
        raise ConfigError("null is not allowed here", path=path, line=line)
    if isinstance(raw, str):
        if kind.startswith("str"):
            return raw
        if kind.startswith("float"):
            # YAML 1.1 reads "1e-6" as a string; accept it as a number
            try:
                return float(raw)
            except ValueError:
                pass
            if unit:
                return _parse_unit(raw, unit, path, line)
        raise ConfigError(
            f"expected a {kind.split('_')[0]}, got string {raw!r}",
            path=path, line=line)
    if isinstance(raw, bool):
        if kind.startswith("bool"):
            return raw
        raise ConfigError(f"expected a {kind.split('_')[0]}, got a bool",
                          path=path, line=line)
    if kind.startswith("bool"):
        raise ConfigError("expected true or false", path=path, line=line)
    if kind.startswith("int"):
        if isinstance(raw, int):
            return raw
        raise ConfigError(f"expected an integer, got {raw!r}",
                          path=path, line=line)
    if kind.startswith("float"):
        if isinstance(raw, (int, float)):
            return float(raw)
        raise ConfigError(f"expected a number, got {raw!r}",
                          path=path, line=line)
    if kind.startswith("str"):
        raise ConfigError(f"expected a string, got {raw!r}",
                          path=path, line=line)
    raise ConfigError(f"unhandled kind {kind}", path=path, line=line)


def _merge_section(schema: dict, data, defaults: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", path=path or "<top>",
                          line=None)
    lines = data.get(_LINES_KEY, {})
    out = dict(defaults)
    for key, raw in data.items():
        if key == _LINES_KEY:
            continue
        here = f"{path}.{key}" if path else key
        line = lines.get(key)
        if key not in schema:
            raise ConfigError(f"unknown key {key!r}", path=here, line=line)
        spec = schema[key]
        if isinstance(spec, dict):
            out[key] = _merge_section(spec, raw, defaults.get(key, {}), here)
        else:
            kind, unit = spec
            out[key] = _coerce(raw, kind, unit, here, line)
    return out


def _defaults() -> dict:
    phys = PhysicalParams()
    em = ErrorModel()
    pol = QecPolicy()
    num = NumericsConfig()
    ql = num.quasilinear
    return {
        "physical": {f.name: getattr(phys, f.name)
                     for f in fields(PhysicalParams)},
        "error_model": {f.name: getattr(em, f.name)
                        for f in fields(ErrorModel)},
        "qec": {f.name: getattr(pol, f.name) for f in fields(QecPolicy)},
        "coefficients": {k: None for k in _SCHEMA["coefficients"]},
        "numerics": {
            "max_steps": num.max_steps,
            "max_seconds": num.max_seconds,
            "sampling_stride": num.sampling_stride,
            "plateau_window_samples": num.plateau_window_samples,
            "plateau_rel_tol": num.plateau_rel_tol,
            "debounce_window": num.debounce_window,
            "quasilinear": {f.name: getattr(ql, f.name)
                            for f in fields(QuasilinearConfig)},
        },
        "outputs": {k: None for k in _SCHEMA["outputs"]},
    }


@dataclass
class RunConfig:
    physical: PhysicalParams
    error_model: ErrorModel = field(default_factory=ErrorModel)
    policy: QecPolicy = field(default_factory=QecPolicy)
    overrides: dict = field(default_factory=dict)
    numerics: NumericsConfig = field(default_factory=NumericsConfig)
    outputs: dict = field(default_factory=dict)


def _build(plain: dict) -> RunConfig:
    n = plain["numerics"]
    numerics = NumericsConfig(
        max_steps=n["max_steps"], max_seconds=n["max_seconds"],
        sampling_stride=n["sampling_stride"],
        plateau_window_samples=n["plateau_window_samples"],
        plateau_rel_tol=n["plateau_rel_tol"],
        debounce_window=n["debounce_window"],
        quasilinear=QuasilinearConfig(**n["quasilinear"]))
    return RunConfig(
        physical=PhysicalParams(**plain["physical"]),
        error_model=ErrorModel(**plain["error_model"]),
        policy=QecPolicy(**plain["qec"]),
        overrides=dict(plain["coefficients"]),
        numerics=numerics,
        outputs=dict(plain["outputs"]))


def apply_sets(plain: dict, sets) -> None:
    """Apply dotted key=value overrides in place (raw, pre-validation)."""
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"override must be key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        dotted = dotted.strip()
        if not dotted:
            raise ConfigError(f"empty key in override {item!r}")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError:
            value = raw
        node = plain
        parts = dotted.split(".")
        for part in parts[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"{part!r} is not a section", path=dotted)
            node = nxt
        node[parts[-1]] = value


def load_config(path=None, sets=()) -> RunConfig:
    """Load YAML (or pure defaults), apply --set overrides, validate."""
    if path is not None:
        with open(path) as fh:
            data = yaml.load(fh, Loader=_MarkedLoader)
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError("top level must be a mapping", path=str(path))
    else:
        data = {}
    if sets:
        apply_sets(data, sets)
    plain = _merge_section(_SCHEMA, data, _defaults(), "")
    return _build(plain)


def to_dict(cfg: RunConfig) -> dict:
    """Plain nested dict of resolved SI values."""
    return {
        "physical": {f.name: getattr(cfg.physical, f.name)
                     for f in fields(PhysicalParams)},
        "error_model": {f.name: getattr(cfg.error_model, f.name)
                        for f in fields(ErrorModel)},
        "qec": {f.name: getattr(cfg.policy, f.name)
                for f in fields(QecPolicy)},
        "coefficients": {k: cfg.overrides.get(k)
                         for k in _SCHEMA["coefficients"]},
        "numerics": {
            "max_steps": cfg.numerics.max_steps,
            "max_seconds": cfg.numerics.max_seconds,
            "sampling_stride": cfg.numerics.sampling_stride,
            "plateau_window_samples": cfg.numerics.plateau_window_samples,
            "plateau_rel_tol": cfg.numerics.plateau_rel_tol,
            "debounce_window": cfg.numerics.debounce_window,
            "quasilinear": {f.name: getattr(cfg.numerics.quasilinear, f.name)
                            for f in fields(QuasilinearConfig)},
        },
        "outputs": {k: cfg.outputs.get(k) for k in _SCHEMA["outputs"]},
    }


def canonical_yaml(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=True,
                          default_flow_style=False)


def config_digest(cfg: RunConfig) -> str:
    return hashlib.sha256(canonical_yaml(cfg).encode()).hexdigest()


def build_run_setup(cfg: RunConfig) -> RunSetup:
    """Derive coefficients, apply explicit overrides, assemble the run."""
    coeffs = derive_coefficients(cfg.physical)
    ov = {k: v for k, v in cfg.overrides.items() if v is not None}
    if ov:
        coeffs = replace(coeffs, **ov)
    return RunSetup(
        coefficients=coeffs,
        error_model=cfg.error_model,
        policy=cfg.policy,
        time_step=cfg.physical.time_step,
        base_temp=cfg.physical.base_temp,
        num_sites=cfg.physical.num_sites,
        fridge_neighbors=cfg.physical.n_fridge_neighbors,
        numerics=cfg.numerics)
