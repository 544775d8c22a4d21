"""Pipeline configuration: schema, validation, and hashing.

The config is a single JSON document (schema version 1). Field defaults
match the library defaults; unknown keys are rejected so typos surface
as ConfigError rather than silently ignored settings.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field

from .cluster import ClusterParams
from .core import ClassTable
from .errors import ConfigError
from .ground import GroundParams
from .refine import RefineConfig

CONFIG_VERSION = 1

_TOP_KEYS = {
    "version",
    "seed",
    "workers",
    "dataset",
    "output",
    "scene_window",
    "classes",
    "ground",
    "cluster",
    "refine",
    "noise_knn",
    "ablation",
    "world",
    "suite_seed",
}


@dataclass
class PipelineConfig:
    dataset: str
    output: str
    seed: int = 0
    workers: int = 0  # 0: use all available cores
    scene_window: int = 40
    table: ClassTable | None = None
    ground: GroundParams = field(default_factory=GroundParams)
    cluster: ClusterParams = field(default_factory=ClusterParams)
    refine: RefineConfig = field(default_factory=RefineConfig)
    noise_knn: int = 5
    ablation_sizes: tuple = (3, 5, 10, 20, 50)
    world: str | None = None  # world spec path for `synth`; None = standard
    suite_seed: int = 0
    raw: dict = field(default_factory=dict)

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode("utf-8")
        ).hexdigest()[:16]


def _build(raw: dict, base_dir: str = ".") -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    version = raw.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version}")
    if "dataset" not in raw:
        raise ConfigError("config needs a 'dataset' path")

    def resolve(p):
        return p if os.path.isabs(p) else os.path.join(base_dir, p)

    table = None
    if raw.get("classes"):
        table = ClassTable.from_dict({"classes": raw["classes"]})

    try:
        ground = GroundParams(**{
            **dict(raw.get("ground", {})),
        }) if raw.get("ground") else GroundParams()
        cl = dict(raw.get("cluster", {}))
        noise_knn = int(cl.pop("noise_knn", raw.get("noise_knn", 5)))
        cluster = ClusterParams(**cl) if cl else ClusterParams()
        refine = RefineConfig(**raw.get("refine", {})) if raw.get("refine") else RefineConfig()
    except TypeError as exc:
        raise ConfigError(f"bad parameter group: {exc}") from exc
    if noise_knn < 1:
        raise ConfigError("noise_knn must be >= 1")

    ablation = raw.get("ablation", {})
    sizes = tuple(ablation.get("min_cluster_sizes", (3, 5, 10, 20, 50)))
    if not sizes or any(int(s) < 2 for s in sizes):
        raise ConfigError("ablation sizes must all be >= 2")

    seed = int(raw.get("seed", 0))
    workers = int(raw.get("workers", 0))
    window = int(raw.get("scene_window", 40))
    if window < 1:
        raise ConfigError("scene_window must be >= 1")
    if workers < 0:
        raise ConfigError("workers must be >= 0")

    return PipelineConfig(
        dataset=resolve(raw["dataset"]),
        output=resolve(raw.get("output", "out")),
        seed=seed,
        workers=workers,
        scene_window=window,
        table=table,
        ground=ground,
        cluster=cluster,
        refine=refine,
        noise_knn=noise_knn,
        ablation_sizes=sizes,
        world=resolve(raw["world"]) if raw.get("world") else None,
        suite_seed=int(raw.get("suite_seed", 0)),
        raw=raw,
    )


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Read and validate a config file; CLI overrides are applied on top."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return _build(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def config_from_dict(raw: dict, base_dir: str = ".") -> PipelineConfig:
    return _build(raw, base_dir=base_dir)
