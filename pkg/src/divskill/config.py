"""Run configuration: a strict JSON key-value tree with dotted-path overrides.

Unknown keys are rejected by name; numeric ranges are validated up front so a
bad config dies before any compute. Ablation toggles live in their own block
and map one-to-one onto the pipeline switches.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields

from .cns import CnsConfig
from .distill import DistillConfig

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EnvConfig:
    name: str = "maze"
    episode_len: int | None = None
    collision_penalty_scale: float = 1.0

    def __post_init__(self):
        if self.name not in ("maze", "push"):
            raise ConfigError(f"unknown environment '{self.name}'")
        if self.collision_penalty_scale <= 0:
            raise ConfigError("collision_penalty_scale must be positive")


@dataclass(frozen=True)
class AblationFlags:
    no_vmax: bool = False
    no_symmetric: bool = False
    no_diversity: bool = False
    fixed_blend: bool = False
    high_penalty: bool = False


@dataclass(frozen=True)
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    n_skills: int = 10
    alpha: float = 0.8
    seeds: tuple[int, ...] = (0,)
    cns: CnsConfig | None = None
    distill: DistillConfig = field(default_factory=DistillConfig)
    eval_episodes: int = 1
    eval_jitter: bool = False
    keep_fraction: float = 0.25
    ablations: AblationFlags = field(default_factory=AblationFlags)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.n_skills < 2:
            raise ConfigError("n_skills must be >= 2")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ConfigError(f"keep_fraction must be in (0, 1], got {self.keep_fraction}")
        if len(self.seeds) == 0:
            raise ConfigError("seeds must be non-empty")
        if self.eval_episodes < 1:
            raise ConfigError("eval_episodes must be >= 1")
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")


_SECTION_TYPES = {
    "env": EnvConfig,
    "cns": CnsConfig,
    "distill": DistillConfig,
    "ablations": AblationFlags,
}


def _build_dataclass(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"'{path}' must be an object")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key '{path}.{key}'" if path else f"unknown config key '{key}'")
        f = known[key]
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid values in '{path or cls.__name__}': {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    known = {f.name for f in fields(RunConfig)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key '{key}'")
        if key in _SECTION_TYPES:
            if key == "cns" and value is None:
                kwargs[key] = None
            else:
                kwargs[key] = _build_dataclass(_SECTION_TYPES[key], value, key)
        elif key == "seeds":
            kwargs[key] = tuple(int(s) for s in value)
        else:
            kwargs[key] = value
    cfg = _build_dataclass_root(kwargs, data)
    return cfg


def _build_dataclass_root(kwargs: dict, raw: dict) -> RunConfig:
    if "cns" not in kwargs:
        kwargs["cns"] = CnsConfig(n_skills=kwargs.get("n_skills", 10))
    try:
        return RunConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config: {exc}") from exc


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)


def load_config(path, overrides: list[str] | None = None) -> RunConfig:
    """Read a JSON config file and apply key=value dotted-path overrides."""
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    for item in overrides or []:
        data = apply_override(data, item)
    return config_from_dict(data)


def apply_override(data: dict, item: str) -> dict:
    """Apply one 'dotted.path=value' override; values parse as JSON, else strings."""
    if "=" not in item:
        raise ConfigError(f"override '{item}' must look like key=value")
    key, raw_value = item.split("=", 1)
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path '{key}' crosses a non-object")
    node[parts[-1]] = value
    return data


def sync_config(cfg: RunConfig) -> RunConfig:
    """Propagate cross-section settings: skills into the search block, ablations into switches."""
    cns = cfg.cns
    if cns is not None and cns.n_skills != cfg.n_skills:
        cns = dataclasses.replace(cns, n_skills=cfg.n_skills)
    if cns is not None and cfg.ablations.fixed_blend and cns.fixed_blend is None:
        cns = dataclasses.replace(cns, fixed_blend=0.5)
    distill = cfg.distill
    updates = {}
    if cfg.ablations.no_vmax and not distill.no_vmax:
        updates["no_vmax"] = True
    if cfg.ablations.no_symmetric and not distill.no_symmetric:
        updates["no_symmetric"] = True
    if cfg.ablations.no_diversity and not distill.no_diversity:
        updates["no_diversity"] = True
    if updates:
        distill = dataclasses.replace(distill, **updates)
    return dataclasses.replace(cfg, cns=cns, distill=distill)
