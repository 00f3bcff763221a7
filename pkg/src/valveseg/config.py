"""Run configuration: defaults < config file (TOML/JSON) < environment < CLI."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

ENV_PREFIX = "VALVESEG_"


@dataclass
class RunConfig:
    input: str | None = None
    annulus: str | None = None
    out: str = "out"
    bp_iters: int = 300
    leaflet_iters: int = 200
    format: str = "stl"
    seed_radius: float = 5.0
    shell_mm: float = 5.0
    sigma: float = 1.0
    beta: str | float = "auto"
    roi_clamp: bool = False
    dump_phi: bool = False
    threads: int | None = None
    host: str = "127.0.0.1"
    port: int = 8760
    # per-stage contour parameter overrides, e.g. {"bloodpool": {"curvature_scale": 1.0}}
    stage_params: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.bp_iters < 1 or self.leaflet_iters < 1:
            raise ValueError("iteration budgets must be >= 1")
        if self.format not in ("stl", "ply"):
            raise ValueError(f"format must be 'stl' or 'ply', got {self.format!r}")


_BOOL_FIELDS = {"roi_clamp", "dump_phi"}
_INT_FIELDS = {"bp_iters", "leaflet_iters", "port", "threads"}
_FLOAT_FIELDS = {"seed_radius", "shell_mm", "sigma"}


def _coerce(name: str, value):
    if value is None:
        return None
    if name in _BOOL_FIELDS:
        if isinstance(value, bool):
            return value
        return str(value).lower() in ("1", "true", "yes", "on")
    if name in _INT_FIELDS:
        return int(value)
    if name in _FLOAT_FIELDS:
        return float(value)
    if name == "beta":
        return value if value == "auto" else float(value)
    return value


def read_config_file(path) -> dict:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return json.loads(text)
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    return tomllib.loads(text)


def env_overrides(environ=None) -> dict:
    environ = environ if environ is not None else os.environ
    out = {}
    names = {f.name for f in fields(RunConfig)}
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX):
            name = key[len(ENV_PREFIX):].lower()
            if name in names:
                out[name] = value
    return out


def build_config(cli_values: dict, config_path=None, environ=None) -> RunConfig:
    """Merge precedence: defaults < config file < environment < explicit CLI values."""
    merged: dict = {}
    if config_path:
        merged.update(read_config_file(config_path))
    merged.update(env_overrides(environ))
    merged.update({k: v for k, v in cli_values.items() if v is not None})
    cfg = RunConfig()
    names = {f.name for f in fields(RunConfig)}
    for key, value in merged.items():
        if key not in names:
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg, key, _coerce(key, value))
    cfg.validate()
    return cfg
