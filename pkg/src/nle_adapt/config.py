"""Experiment configuration: one JSON document, validated up front."""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import codebook as cbm
from . import nn
from .exceptions import ConfigError, NLEError
from .pipeline import (
    METHODS,
    TASKS,
    ExperimentSpec,
    default_adapt_config,
    default_source_config,
    task_spec,
)

# above this the codebook is |C|^2 floats per method and tests stop being quick
DESK_SCALE_MAX_CLASSES = 1000
FULL_SCALE_SENONES = 9404

_TOP_KEYS = {"paths", "task", "shift", "network", "source_train", "adapt_train",
             "centroid", "methods", "num_seeds", "master_seed", "uncovered", "timing_in_csv"}
_PATH_KEYS = ("data_dir", "model_dir", "report_dir")


@dataclass
class ExperimentConfig:
    data_dir: str = "runs/data"
    model_dir: str = "runs/models"
    report_dir: str = "runs/reports"
    task: str = "default"
    shift: dict = field(default_factory=dict)
    hidden: list = field(default_factory=lambda: [64, 64])
    activation: str = "tanh"
    source_train: nn.TrainConfig = field(default_factory=default_source_config)
    adapt_train: nn.TrainConfig = field(default_factory=default_adapt_config)
    centroid: cbm.CentroidTrainConfig = field(default_factory=cbm.CentroidTrainConfig)
    methods: list = field(default_factory=lambda: list(METHODS[:5]))
    num_seeds: int = 10
    master_seed: int = 0
    uncovered: str = "error"
    timing_in_csv: bool = False

    def to_dict(self):
        return {
            "paths": {k: getattr(self, k) for k in _PATH_KEYS},
            "task": self.task,
            "shift": dict(self.shift),
            "network": {"hidden": list(self.hidden), "activation": self.activation},
            "source_train": self.source_train.to_dict(),
            "adapt_train": self.adapt_train.to_dict(),
            "centroid": self.centroid.to_dict(),
            "methods": list(self.methods),
            "num_seeds": self.num_seeds,
            "master_seed": self.master_seed,
            "uncovered": self.uncovered,
            "timing_in_csv": self.timing_in_csv,
        }

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def domain_spec(self, seed=0):
        return task_spec(self.task, seed, **self.shift)

    def experiment(self):
        return ExperimentSpec(
            task=self.task, shift=dict(self.shift), hidden=tuple(self.hidden),
            activation=self.activation, source_cfg=self.source_train,
            adapt_cfg=self.adapt_train, centroid_cfg=self.centroid,
            num_seeds=self.num_seeds, master_seed=self.master_seed, uncovered=self.uncovered,
        )

    def path(self, key):
        return Path(getattr(self, key))


def _section(d, key, cls):
    try:
        return cls(**d.get(key, {})) if key in d else None
    except TypeError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def from_dict(d):
    """Build and validate a config.  Raises :class:`ConfigError`."""
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    cfg = ExperimentConfig()
    try:
        paths = d.get("paths", {})
        bad = set(paths) - set(_PATH_KEYS)
        if bad:
            raise ConfigError(f"unknown path keys {sorted(bad)}")
        for k, v in paths.items():
            setattr(cfg, k, str(v))
        for key in ("task", "methods", "num_seeds", "master_seed", "uncovered", "timing_in_csv"):
            if key in d:
                setattr(cfg, key, d[key])
        if "shift" in d:
            cfg.shift = dict(d["shift"])
        net = d.get("network", {})
        cfg.hidden = list(net.get("hidden", cfg.hidden))
        cfg.activation = net.get("activation", cfg.activation)
        cfg.source_train = _section(d, "source_train", nn.TrainConfig) or cfg.source_train
        cfg.adapt_train = _section(d, "adapt_train", nn.TrainConfig) or cfg.adapt_train
        cfg.centroid = _section(d, "centroid", cbm.CentroidTrainConfig) or cfg.centroid
    except ConfigError:
        raise
    except (NLEError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    validate(cfg)
    return cfg


def validate(cfg):
    """Check a config; returns a list of warnings, raises on hard errors."""
    if cfg.task not in TASKS:
        raise ConfigError(f"unknown task {cfg.task!r}; known: {sorted(TASKS)}")
    if not isinstance(cfg.methods, list) or any(m not in METHODS for m in cfg.methods):
        raise ConfigError(f"methods must be drawn from {list(METHODS)}, got {cfg.methods}")
    if not isinstance(cfg.num_seeds, int) or cfg.num_seeds < 1:
        raise ConfigError("num_seeds must be a positive integer")
    if not isinstance(cfg.master_seed, int) or cfg.master_seed < 0:
        raise ConfigError("master_seed must be a non-negative integer")
    if cfg.uncovered not in ("error", "one_hot"):
        raise ConfigError("uncovered must be 'error' or 'one_hot'")
    if cfg.activation not in nn.ACTIVATIONS:
        raise ConfigError(f"activation must be one of {nn.ACTIVATIONS}")
    if not cfg.hidden or any(not isinstance(h, int) or h < 1 for h in cfg.hidden):
        raise ConfigError("network.hidden must be a non-empty list of positive integers")
    try:
        spec = cfg.domain_spec()
    except TypeError as exc:
        raise ConfigError(f"shift: {exc}") from None
    except NLEError as exc:
        raise ConfigError(f"shift: {exc}") from None
    for key in _PATH_KEYS:
        _check_resolvable(key, getattr(cfg, key))

    warnings = []
    C = spec.num_classes
    if C > DESK_SCALE_MAX_CLASSES:
        note = (" (the full-scale senone inventory size)" if C == FULL_SCALE_SENONES else "")
        warnings.append(
            f"num_classes={C}{note} exceeds the desk-scale default limit of "
            f"{DESK_SCALE_MAX_CLASSES}; codebooks hold {C}x{C} entries per method"
        )
        if spec.feature_dim < C:
            warnings.append(f"feature_dim={spec.feature_dim} is far below num_classes={C}")
    return warnings


def _check_resolvable(key, value):
    p = Path(value).expanduser().resolve()
    for parent in [p, *p.parents]:
        if parent.exists():
            if not parent.is_dir():
                raise ConfigError(f"paths.{key}: {parent} exists and is not a directory")
            return
    raise ConfigError(f"paths.{key}: {value} cannot be resolved")


def load(path):
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
    return from_dict(d)

