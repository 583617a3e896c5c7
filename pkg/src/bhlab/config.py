"""Run configuration: sectioned key-value files (INI) or JSON, with env overrides.

Every key is checked against :data:`SCHEMA`; unknown sections or keys raise
:class:`~bhlab.errors.ConfigError`. An environment variable
``BHLAB_<SECTION>__<KEY>`` overrides the file value.
"""
from __future__ import annotations

import configparser
import json
import os

from .diagnostics import DiagnosticsConfig
from .errors import ConfigError
from .evolve import EvolveConfig
from .grid import Grid1D
from .hilbert import HilbertMethod
from .initdata import InitConfig
from .shooting import ShootConfig

ENV_PREFIX = "BHLAB_"

# "ofloat" is a float that may be given as "none"/"auto" (None)
SCHEMA = {
    "run": {"seed": ("int", 0), "label": ("str", "run")},
    "grid": {"n_points": ("int", 2 ** 16), "half_width": ("float", 2.0)},
    "init": {
        "epsilon": ("float", 0.1), "alpha": ("float", 0.0), "beta": ("float", 0.0),
        "kappa0": ("float", 0.0), "uhat": ("str", "zero"), "uhat_amplitude": ("float", 0.0),
        "chi": ("str", "mollified"), "chi_delta": ("float", 0.25),
        "c_alpha": ("float", 1.0), "c_beta": ("float", 1.0), "family": ("int", 2),
    },
    "evolve": {
        "cfl": ("float", 0.4), "dealias": ("bool", True), "stop_slope": ("ofloat", None),
        "t_max": ("float", float("inf")), "s_max": ("float", float("inf")),
        "output_every": ("int", 10), "frame_every": ("int", 4),
        "frame_half_width": ("float", 8.0), "frame_points": ("int", 256),
        "resolution_tol": ("float", 1e-10), "filter_kX": ("float", 100.0),
    },
    "hilbert": {"method": ("str", "spectral"), "pad_factor": ("int", 4),
                "near_radius_rule": ("str", "weighted")},
    "shoot": {
        "n_checkpoints": ("int", 3), "checkpoint_spacing": ("float", 1.0),
        "newton_tol": ("float", 1e-8), "max_newton_iters": ("int", 8),
        "jacobian_mode": ("str", "variational"), "fd_step": ("float", 1e-4),
        "fd_check_checkpoints": ("int", 2), "jacobian_rel_tol": ("float", 0.05),
        "ratio_floor": ("float", 1e-9),
        "trust_radius_alpha": ("ofloat", None), "trust_radius_beta": ("ofloat", None),
        "jobs": ("int", 1),
    },
    "diagnostics": {
        "holder_r_min": ("float", 0.005), "holder_r_max": ("float", 0.5),
        "profile_half_width": ("float", 5.0), "decay_s_min": ("ofloat", None),
        "decay_s_max": ("ofloat", None), "decay_end_margin": ("float", 0.5),
        "monitor_M": ("float", 4.0), "monitor_middle_1x": ("float", 0.5),
    },
}


def _coerce(section, key, kind, raw):
    if not isinstance(raw, str):
        if kind == "ofloat" and raw is None:
            return None
        if kind in ("float", "ofloat") and isinstance(raw, (int, float)) \
                and not isinstance(raw, bool):
            return float(raw)
        if kind == "int" and isinstance(raw, int) and not isinstance(raw, bool):
            return raw
        if kind == "bool" and isinstance(raw, bool):
            return raw
        if kind == "str":
            raise ConfigError(f"{section}.{key}: expected a string, got {raw!r}")
        raw = str(raw)
    text = raw.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "ofloat":
            return None if text.lower() in ("none", "auto", "") else float(text)
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        return text
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot read {raw!r} as {kind}") from None


def defaults() -> dict:
    return {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}


def _read_file(path) -> dict:
    if str(path).endswith(".json"):
        with open(path) as fh:
            data = json.load(fh)
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigError("JSON config must map section names to objects")
        return data
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return {sec: dict(parser.items(sec)) for sec in parser.sections()}


def merge(base: dict, raw: dict, origin: str = "config") -> dict:
    out = {sec: dict(vals) for sec, vals in base.items()}
    for sec, vals in raw.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}] in {origin}")
        for key, val in vals.items():
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key '{sec}.{key}' in {origin}")
            out[sec][key] = _coerce(sec, key, SCHEMA[sec][key][0], val)
    return out


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    raw = {}
    for name, val in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        sec, _, key = name[len(ENV_PREFIX):].partition("__")
        raw.setdefault(sec.lower(), {})[key.lower()] = val
    return raw


def parse_assignments(items) -> dict:
    """``section.key=value`` strings (command-line ``--set``) to a nested dict."""
    raw = {}
    for item in items or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        lhs, val = item.split("=", 1)
        sec, key = lhs.split(".", 1)
        raw.setdefault(sec.strip(), {})[key.strip()] = val
    return raw


def load_config(path=None, overrides=None, environ=None) -> dict:
    """Resolved configuration: defaults, then file, then environment, then overrides."""
    cfg = defaults()
    if path is not None:
        cfg = merge(cfg, _read_file(path), str(path))
    cfg = merge(cfg, env_overrides(environ), "environment")
    if overrides:
        cfg = merge(cfg, overrides, "command line")
    validate(cfg)
    return cfg


def validate(cfg: dict):
    """Build every typed config once so that invalid values fail early."""
    try:
        grid_of(cfg)
        init_of(cfg)
        evolve_of(cfg)
        if cfg["init"]["family"] == 2:
            shoot_of(cfg)
        diagnostics_of(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def grid_of(cfg) -> Grid1D:
    g = cfg["grid"]
    return Grid1D.symmetric(g["half_width"], g["n_points"])


def hilbert_of(cfg) -> HilbertMethod:
    h = cfg["hilbert"]
    return HilbertMethod(h["method"], h["pad_factor"], h["near_radius_rule"])


def init_of(cfg) -> InitConfig:
    return InitConfig(**cfg["init"])


def evolve_of(cfg) -> EvolveConfig:
    e = dict(cfg["evolve"])
    return EvolveConfig(hilbert=hilbert_of(cfg), family=cfg["init"]["family"], **e)


def shoot_of(cfg) -> ShootConfig:
    g = cfg["grid"]
    e = cfg["evolve"]
    return ShootConfig(init=init_of(cfg), n_points=g["n_points"], half_width=g["half_width"],
                       cfl=e["cfl"], dealias=e["dealias"], hilbert=hilbert_of(cfg),
                       filter_kX=e["filter_kX"], **cfg["shoot"])


def diagnostics_of(cfg) -> DiagnosticsConfig:
    return DiagnosticsConfig(resolution_tol=cfg["evolve"]["resolution_tol"], **cfg["diagnostics"])


def to_ini(cfg: dict) -> str:
    lines = []
    for sec, vals in cfg.items():
        lines.append(f"[{sec}]")
        for k, v in vals.items():
            lines.append(f"{k} = {'none' if v is None else v}")
        lines.append("")
    return "\n".join(lines)

