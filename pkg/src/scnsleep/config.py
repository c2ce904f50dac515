"""Experiment configuration: TOML plans, presets and run manifests.

A plan file has the sections ``network``, ``traffic``, ``radio``, ``sleep``,
``scheduler`` and ``run``.  Four keys may hold a list instead of a scalar and
then form the sweep axes: ``sleep.on_ratio``, ``sleep.lambda_s``,
``traffic.w_t`` and ``scheduler.kind``.  A JSON manifest written by a
previous run is accepted in place of a plan and reproduces that run.
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .sim import BITS_PER_MB, ConfigError, SimConfig

# (section, key in file) -> SimConfig field
KEYS = {
    ("network", "rho_c"): "rho_c",
    ("network", "rho_u"): "rho_u",
    ("network", "region_radius"): "region_radius",
    ("network", "r_th"): "r_th",
    ("traffic", "lambda_u"): "lambda_u",
    ("traffic", "mean_file_size_mb"): "mean_file_size",
    ("traffic", "w_t"): "w_t",
    ("radio", "bandwidth"): "bandwidth",
    ("radio", "snr_db"): "snr_db",
    ("radio", "path_loss_exp"): "path_loss_exp",
    ("radio", "raw_distance_sinr"): "raw_distance_sinr",
    ("sleep", "lambda_s"): "lambda_s",
    ("sleep", "on_ratio"): "on_ratio",
    ("scheduler", "kind"): "scheduler",
    ("scheduler", "kappa"): "kappa",
    ("scheduler", "dlb_max_hops"): "dlb_max_hops",
    ("scheduler", "load_fit"): "load_fit",
    ("run", "sim_time"): "sim_time",
    ("run", "replications"): "replications",
    ("run", "seed"): "seed",
    ("run", "warmup"): "warmup",
    ("run", "utilization_label"): "utilization_label",
}
REQUIRED = (
    ("network", "rho_c"), ("network", "rho_u"),
    ("traffic", "lambda_u"), ("traffic", "mean_file_size_mb"),
    ("sleep", "on_ratio"), ("scheduler", "kind"),
)
AXES = ("scheduler", "on_ratio", "lambda_s", "w_t")
PRESETS = ("low_util", "high_util")


def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentPlan:
    base: SimConfig
    scheduler: tuple
    on_ratio: tuple
    lambda_s: tuple
    w_t: tuple

    def __post_init__(self):
        for axis in AXES:
            if len(getattr(self, axis)) == 0:
                raise ConfigError(axis, "sweep axis is empty")
        # validate every value up front so a bad axis fails before any run
        for cfg in self.points():
            pass

    def points(self):
        """SimConfig for every axis combination, scheduler varying slowest."""
        for sch, on, ls, wt in itertools.product(self.scheduler, self.on_ratio, self.lambda_s, self.w_t):
            yield replace(self.base, scheduler=sch, on_ratio=on, lambda_s=ls, w_t=wt)

    def __len__(self):
        return len(self.scheduler) * len(self.on_ratio) * len(self.lambda_s) * len(self.w_t)

    def to_dict(self) -> dict:
        d = {"base": self.base.to_dict()}
        for axis in AXES:
            d[axis] = list(getattr(self, axis))
        return d

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())

    def override(self, seed=None, replications=None, raw_distance_sinr=None) -> "ExperimentPlan":
        changes = {}
        if seed is not None:
            changes["seed"] = int(seed)
        if replications is not None:
            changes["replications"] = int(replications)
        if raw_distance_sinr:
            changes["raw_distance_sinr"] = True
        return replace(self, base=replace(self.base, **changes)) if changes else self


def _as_tuple(value):
    return tuple(value) if isinstance(value, (list, tuple)) else (value,)


def plan_from_dict(doc: dict) -> ExperimentPlan:
    """Build a plan from parsed TOML sections."""
    for section, body in doc.items():
        if section not in {s for s, _ in KEYS}:
            raise ConfigError(section, "unknown section")
        if not isinstance(body, dict):
            raise ConfigError(section, "expected a table")
        for key in body:
            if (section, key) not in KEYS:
                raise ConfigError(f"{section}.{key}", "unknown key")
    for section, key in REQUIRED:
        if key not in doc.get(section, {}):
            raise ConfigError(f"{section}.{key}", "required key is missing")

    values, axes = {}, {}
    for (section, key), name in KEYS.items():
        if key not in doc.get(section, {}):
            continue
        v = doc[section][key]
        if name in AXES:
            axes[name] = _as_tuple(v)
            continue
        if isinstance(v, list):
            raise ConfigError(f"{section}.{key}", "only sweep axes may be lists")
        values[name] = v * BITS_PER_MB if name == "mean_file_size" else v

    first = {axis: vals[0] for axis, vals in axes.items() if vals}
    try:
        base = SimConfig(**values, **first)
    except ConfigError as e:
        raise ConfigError(_file_key(e.key), str(e).split(": ", 1)[1]) from None
    except TypeError as e:
        raise ConfigError("config", str(e)) from None
    axes = {axis: axes.get(axis, (getattr(base, axis),)) for axis in AXES}
    try:
        return ExperimentPlan(base, **axes)
    except ConfigError as e:
        raise ConfigError(_file_key(e.key), str(e).split(": ", 1)[1]) from None


def _file_key(field_name: str) -> str:
    for (section, key), name in KEYS.items():
        if name == field_name:
            return f"{section}.{key}"
    return field_name


def plan_from_manifest(doc: dict) -> ExperimentPlan:
    plan = doc.get("plan")
    if not isinstance(plan, dict) or "base" not in plan:
        raise ConfigError("plan", "manifest has no plan")
    unknown = set(plan["base"]) - set(SimConfig.field_names())
    if unknown:
        raise ConfigError(f"plan.base.{sorted(unknown)[0]}", "unknown key")
    base = SimConfig(**plan["base"])
    return ExperimentPlan(base, **{axis: tuple(plan.get(axis, ())) for axis in AXES})


def load_plan(path) -> ExperimentPlan:
    """Read a TOML plan, a preset name, or a JSON manifest."""
    path = str(path)
    if path in PRESETS:
        text = resources.files("scnsleep.presets").joinpath(f"{path}.toml").read_text()
        return plan_from_dict(tomllib.loads(text))
    p = Path(path)
    if not p.exists():
        raise ConfigError("--config", f"no such file: {path}")
    text = p.read_text()
    if p.suffix == ".json":
        try:
            return plan_from_manifest(json.loads(text))
        except json.JSONDecodeError as e:
            raise ConfigError("--config", f"invalid JSON: {e}") from None
    try:
        return plan_from_dict(tomllib.loads(text))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError("--config", f"invalid TOML: {e}") from None
