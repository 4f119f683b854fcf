"""Declarative experiment configuration.

Config files are TOML: top-level keys plus [features], [model], [resample],
and [task] sections. Every field of ExperimentConfig is addressable from the
file; CLI flags override seed and protocol. See configs/ for examples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

MODEL_VARIANTS = ("tree", "knn", "forest", "adaboost")

_MODEL_OPTION_KEYS = {
    "tree": {"criterion", "min_samples_split", "max_depth"},
    "knn": {"n_neighbors", "distance_weighted"},
    "forest": {"n_estimators", "criterion", "min_samples_split", "max_depth",
               "bootstrap", "features_per_split"},
    "adaboost": {"n_estimators", "learning_rate", "base_max_depth",
                 "criterion", "min_samples_split"},
}

PIPELINE_ORDERS = ("select_then_pca", "pca_then_select")


class ConfigError(Exception):
    """Config file is malformed or out of range."""


@dataclass(frozen=True)
class FeatureConfig:
    time_block: bool = True
    zscore: bool = False
    pca_components: int | None = None
    select_percentile: int | None = None
    pipeline_order: str = "select_then_pca"

    def __post_init__(self):
        if self.pca_components is not None and self.pca_components < 1:
            raise ConfigError("pca_components must be >= 1")
        if self.select_percentile is not None and not 0 < self.select_percentile <= 100:
            raise ConfigError("select_percentile must be in (0, 100]")
        if self.pipeline_order not in PIPELINE_ORDERS:
            raise ConfigError(f"pipeline_order must be one of {PIPELINE_ORDERS}")


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant not in MODEL_VARIANTS:
            raise ConfigError(f"model variant must be one of {MODEL_VARIANTS}, "
                              f"got {self.variant!r}")
        unknown = set(self.options) - _MODEL_OPTION_KEYS[self.variant]
        if unknown:
            raise ConfigError(f"unknown {self.variant} options: {sorted(unknown)}")


@dataclass(frozen=True)
class ResampleSpec:
    method: str | None = None
    k: int | None = None
    target: int | None = None  # smote per-class goal; None -> majority count
    paper_protocol: bool = False

    def __post_init__(self):
        if self.method is not None and self.method not in ("smote", "random_under", "enn"):
            raise ConfigError(f"unknown resample method {self.method!r}")
        if self.k is not None and self.k < 1:
            raise ConfigError("resample k must be >= 1")
        if self.target is not None and self.target < 1:
            raise ConfigError("resample target must be >= 1")
        if self.paper_protocol and self.method is None:
            raise ConfigError("paper_protocol requires a resample method")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment cell needs besides the cached dataset."""

    name: str
    model: ModelConfig
    seed: int = 0
    test_fraction: float = 0.25
    subsample: int | None = None
    features: FeatureConfig = field(default_factory=FeatureConfig)
    resample: ResampleSpec = field(default_factory=ResampleSpec)
    binary_threshold: int | None = None

    def __post_init__(self):
        if not self.name:
            raise ConfigError("experiment name must be non-empty")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test_fraction must be in (0, 1)")
        if self.subsample is not None and self.subsample < 2:
            raise ConfigError("subsample must be >= 2")
        if self.binary_threshold is not None and self.binary_threshold <= 0:
            raise ConfigError("binary_threshold must be positive")

    # seed derivation: one knob drives all stages by fixed offsets
    @property
    def split_seed(self) -> int:
        return self.seed

    @property
    def resample_seed(self) -> int:
        return self.seed + 1

    @property
    def model_seed(self) -> int:
        return self.seed + 2

    def with_overrides(self, seed: int | None = None,
                       paper_protocol: bool | None = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = ExperimentConfig(
                name=cfg.name, model=cfg.model, seed=seed,
                test_fraction=cfg.test_fraction, subsample=cfg.subsample,
                features=cfg.features, resample=cfg.resample,
                binary_threshold=cfg.binary_threshold)
        if paper_protocol is not None and cfg.resample.method is not None:
            res = ResampleSpec(method=cfg.resample.method, k=cfg.resample.k,
                               target=cfg.resample.target,
                               paper_protocol=paper_protocol)
            cfg = ExperimentConfig(
                name=cfg.name, model=cfg.model, seed=cfg.seed,
                test_fraction=cfg.test_fraction, subsample=cfg.subsample,
                features=cfg.features, resample=res,
                binary_threshold=cfg.binary_threshold)
        return cfg

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "test_fraction": self.test_fraction,
            "subsample": self.subsample,
            "features": {
                "time_block": self.features.time_block,
                "zscore": self.features.zscore,
                "pca_components": self.features.pca_components,
                "select_percentile": self.features.select_percentile,
                "pipeline_order": self.features.pipeline_order,
            },
            "model": {"variant": self.model.variant, **self.model.options},
            "resample": {
                "method": self.resample.method,
                "k": self.resample.k,
                "target": self.resample.target,
                "paper_protocol": self.resample.paper_protocol,
            },
            "binary_threshold": self.binary_threshold,
        }


def _section(data: dict, key: str) -> dict:
    section = data.get(key, {})
    if not isinstance(section, dict):
        raise ConfigError(f"[{key}] must be a table")
    return dict(section)


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    model_section = _section(data, "model")
    if "variant" not in model_section:
        raise ConfigError("[model] requires a 'variant' key")
    variant = model_section.pop("variant")
    features = _section(data, "features")
    resample_section = _section(data, "resample")
    task = _section(data, "task")

    known_top = {"name", "seed", "test_fraction", "subsample",
                 "features", "model", "resample", "task"}
    unknown = set(data) - known_top
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    try:
        return ExperimentConfig(
            name=data.get("name", "experiment"),
            seed=int(data.get("seed", 0)),
            test_fraction=float(data.get("test_fraction", 0.25)),
            subsample=data.get("subsample"),
            features=FeatureConfig(**features),
            model=ModelConfig(variant=variant, options=model_section),
            resample=ResampleSpec(**resample_section),
            binary_threshold=task.get("binary_threshold"),
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    with path.open("rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(data)
