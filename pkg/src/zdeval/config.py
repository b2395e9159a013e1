"""Declarative experiment configuration.

A config is one flat JSON document; every knob the run depends on lives here
(there is no hidden nondeterminism: the seed is required). CLI flags may
override individual keys. Unknown keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .classifiers import ForestConfig, MlpConfig
from .errors import ConfigError
from .flowdata import FeatureSchema

KNOWN_MODELS = ("forest", "mlp")

_TOP_LEVEL_KEYS = {
    "dataset": str,
    "benign_name": str,
    "columns": list,
    "models": list,
    "k": int,
    "seed": int,
    "fit_scope": str,
    "wd_on_scaled": bool,
    "wd_subsample_cap": (int, type(None)),
    "subsample": (int, type(None)),
    "classes": (list, type(None)),
    "output_dir": str,
    "workers": (int, type(None)),
    "keep_going": bool,
    "save_models": bool,
    "on_bad_row": str,
    "unseen_category_policy": str,
    "threshold": float,
    "forest": dict,
    "mlp": dict,
}

_FOREST_KEYS = {"n_trees", "m_try", "max_depth", "min_samples_leaf", "bootstrap"}
_MLP_KEYS = {"learning_rate", "batch_size", "epochs", "hidden_units"}


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    benign_name: str
    schema: FeatureSchema
    models: tuple[str, ...] = ("forest", "mlp")
    k: int = 5
    seed: int = 0
    fit_scope: str = "full-dataset"
    wd_on_scaled: bool = True
    wd_subsample_cap: int | None = 100_000
    subsample: int | None = None
    classes: tuple[str, ...] | None = None
    output_dir: str = "out"
    workers: int | None = None
    keep_going: bool = False
    save_models: bool = True
    on_bad_row: str = "abort"
    unseen_category_policy: str = "reserve-code"
    threshold: float = 0.5
    forest: ForestConfig = field(default_factory=ForestConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)

    def __post_init__(self) -> None:
        if not self.models:
            raise ConfigError("at least one model must be selected")
        for m in self.models:
            if m not in KNOWN_MODELS:
                raise ConfigError(f"unknown model {m!r}; known models: {', '.join(KNOWN_MODELS)}")
        if len(set(self.models)) != len(self.models):
            raise ConfigError(f"duplicate model in {self.models}")
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if self.fit_scope not in ("full-dataset", "train-only"):
            raise ConfigError(f"fit_scope must be 'full-dataset' or 'train-only', got {self.fit_scope!r}")
        if self.on_bad_row not in ("abort", "drop"):
            raise ConfigError(f"on_bad_row must be 'abort' or 'drop', got {self.on_bad_row!r}")
        if self.unseen_category_policy not in ("error", "reserve-code"):
            raise ConfigError(
                f"unseen_category_policy must be 'error' or 'reserve-code', got {self.unseen_category_policy!r}"
            )
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in [0, 1], got {self.threshold}")
        if self.subsample is not None and self.subsample < 1:
            raise ConfigError(f"subsample must be >= 1, got {self.subsample}")
        if self.wd_subsample_cap is not None and self.wd_subsample_cap < 1:
            raise ConfigError(f"wd_subsample_cap must be >= 1, got {self.wd_subsample_cap}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")

    def resolved_workers(self) -> int:
        return self.workers if self.workers is not None else (os.cpu_count() or 1)

    def to_json(self) -> dict:
        """Config echo with every default resolved, for the run report."""
        return {
            "dataset": self.dataset,
            "benign_name": self.benign_name,
            "columns": self.schema.to_json(),
            "models": list(self.models),
            "k": self.k,
            "seed": self.seed,
            "fit_scope": self.fit_scope,
            "wd_on_scaled": self.wd_on_scaled,
            "wd_subsample_cap": self.wd_subsample_cap,
            "subsample": self.subsample,
            "classes": list(self.classes) if self.classes is not None else None,
            "output_dir": self.output_dir,
            "workers": self.resolved_workers(),
            "keep_going": self.keep_going,
            "save_models": self.save_models,
            "on_bad_row": self.on_bad_row,
            "unseen_category_policy": self.unseen_category_policy,
            "threshold": self.threshold,
            "forest": {
                "n_trees": self.forest.n_trees,
                "m_try": self.forest.m_try,
                "max_depth": self.forest.max_depth,
                "min_samples_leaf": self.forest.min_samples_leaf,
                "bootstrap": self.forest.bootstrap,
            },
            "mlp": {
                "learning_rate": self.mlp.learning_rate,
                "batch_size": self.mlp.batch_size,
                "epochs": self.mlp.epochs,
                "hidden_units": list(self.mlp.hidden_units),
            },
        }


def _check_type(key: str, value, expected) -> None:
    # bool is an int subclass; keep them apart for int-typed keys
    if isinstance(expected, tuple):
        ok = isinstance(value, expected) and not (isinstance(value, bool) and bool not in expected)
    elif expected is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif expected is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    else:
        ok = isinstance(value, expected)
    if not ok:
        raise ConfigError(f"config key {key!r} has wrong type: expected {expected}, got {type(value).__name__}")


def config_from_dict(obj: dict, *, base_dir: Path | None = None) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from a parsed JSON document."""
    if not isinstance(obj, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = set(obj) - set(_TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key {sorted(unknown)[0]!r}")
    for key in ("dataset", "benign_name", "columns"):
        if key not in obj:
            raise ConfigError(f"config is missing required key {key!r}")
    if "seed" not in obj:
        raise ConfigError("config is missing required key 'seed' (runs must be explicitly seeded)")
    for key, value in obj.items():
        _check_type(key, value, _TOP_LEVEL_KEYS[key])

    try:
        schema = FeatureSchema.from_json(obj["columns"])
    except Exception as exc:
        raise ConfigError(f"bad 'columns' entry: {exc}") from exc

    forest_obj = obj.get("forest", {})
    unknown = set(forest_obj) - _FOREST_KEYS
    if unknown:
        raise ConfigError(f"unknown forest key {sorted(unknown)[0]!r}")
    mlp_obj = obj.get("mlp", {})
    unknown = set(mlp_obj) - _MLP_KEYS
    if unknown:
        raise ConfigError(f"unknown mlp key {sorted(unknown)[0]!r}")
    try:
        forest = ForestConfig(**forest_obj)
        if "hidden_units" in mlp_obj:
            mlp_obj = dict(mlp_obj, hidden_units=tuple(mlp_obj["hidden_units"]))
        mlp = MlpConfig(**mlp_obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model hyperparameters: {exc}") from exc

    dataset = obj["dataset"]
    if base_dir is not None and not Path(dataset).is_absolute():
        dataset = str(base_dir / dataset)

    try:
        return ExperimentConfig(
            dataset=dataset,
            benign_name=obj["benign_name"],
            schema=schema,
            models=tuple(obj.get("models", ["forest", "mlp"])),
            k=obj.get("k", 5),
            seed=obj["seed"],
            fit_scope=obj.get("fit_scope", "full-dataset"),
            wd_on_scaled=obj.get("wd_on_scaled", True),
            wd_subsample_cap=obj.get("wd_subsample_cap", 100_000),
            subsample=obj.get("subsample"),
            classes=tuple(obj["classes"]) if obj.get("classes") is not None else None,
            output_dir=obj.get("output_dir", "out"),
            workers=obj.get("workers"),
            keep_going=obj.get("keep_going", False),
            save_models=obj.get("save_models", True),
            on_bad_row=obj.get("on_bad_row", "abort"),
            unseen_category_policy=obj.get("unseen_category_policy", "reserve-code"),
            threshold=float(obj.get("threshold", 0.5)),
            forest=forest,
            mlp=mlp,
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file does not exist: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc
    return config_from_dict(obj, base_dir=path.parent)


def apply_overrides(
    cfg: ExperimentConfig,
    *,
    out: str | None = None,
    seed: int | None = None,
    models: tuple[str, ...] | None = None,
    classes: tuple[str, ...] | None = None,
    subsample: int | None = None,
    workers: int | None = None,
    keep_going: bool | None = None,
) -> ExperimentConfig:
    """CLI flags win over config keys; anything left None keeps the config value."""
    updates: dict = {}
    if out is not None:
        updates["output_dir"] = out
    if seed is not None:
        updates["seed"] = seed
    if models is not None:
        updates["models"] = models
    if classes is not None:
        updates["classes"] = classes
    if subsample is not None:
        updates["subsample"] = subsample
    if workers is not None:
        updates["workers"] = workers
    if keep_going is not None:
        updates["keep_going"] = keep_going
    return replace(cfg, **updates) if updates else cfg
