"""Experiment configuration: JSON schema, defaults, and validation.

Every leaf carries an origin tag: "paper" for values taken from the
published training recipe, "default" for choices this implementation had
to make, and "user" once a config file overrides it.  Validation reports
the dotted path of the offending key (e.g. "loss.alpha").
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

DATA_ROOT_ENV = "PROTOMM_DATA_ROOT"


def _bounded(lo=None, hi=None, strict_lo=False):
    def check(v):
        if lo is not None and (v <= lo if strict_lo else v < lo):
            return f"must be {'>' if strict_lo else '>='} {lo}"
        if hi is not None and v > hi:
            return f"must be <= {hi}"
        return None
    return check


def _choice(*options):
    def check(v):
        return None if v in options else f"must be one of {sorted(options)}"
    return check


@dataclass
class Field:
    default: object
    origin: str  # "paper" or "default"
    types: tuple
    check: object = None


_NUM = (int, float)

SCHEMA = {
    "data": {
        "dataset": Field("synthetic", "default", (str,), _choice("synthetic", "wesad", "dalia")),
        "task": Field("none", "default", (str,)),
        "root": Field(None, "default", (str, type(None))),
        "synthetic": {
            "n_subjects": Field(8, "default", (int,), _bounded(1)),
            "n_latent_states": Field(4, "default", (int,), _bounded(2)),
            "shared_fraction": Field(0.7, "default", _NUM, _bounded(0.0, 1.0)),
            "duration_s": Field(160.0, "default", _NUM, _bounded(0.0, strict_lo=True)),
            "sample_rate_hz": Field(50.0, "paper", _NUM, _bounded(0.0, strict_lo=True)),
            "noise_sigma": Field(0.5, "default", _NUM, _bounded(0.0)),
            "seed": Field(0, "default", (int,)),
            "window_s": Field(8.0, "default", _NUM, _bounded(0.0, strict_lo=True)),
            "stay_prob": Field(0.5, "default", _NUM, _bounded(0.0, 1.0)),
        },
    },
    "augmentation": {
        "num_views": Field(2, "paper", (int,), _bounded(2)),
    },
    "encoder": {
        "kernel_size": Field(11, "default", (int,), _bounded(1)),
        "stride": Field(2, "default", (int,), _bounded(1)),
        "embed_dim": Field(512, "paper", (int,), _bounded(1)),
        "block_layout": Field([2, 2, 2, 2], "default", (list,)),
        "base_width": Field(32, "default", (int,), _bounded(1)),
        "dtype": Field("float32", "default", (str,), _choice("float32", "float64")),
    },
    "prototypes": {
        "count": Field(512, "default", (int,), _bounded(1)),
        "temperature": Field(0.1, "default", _NUM, _bounded(0.0, strict_lo=True)),
        "sinkhorn_epsilon": Field(0.05, "default", _NUM, _bounded(0.0, strict_lo=True)),
        "sinkhorn_iters": Field(3, "default", (int,), _bounded(1)),
    },
    "loss": {
        "objective": Field("protomm", "paper", (str,), _choice("protomm", "simclr", "clip", "slip")),
        "alpha": Field(0.5, "paper", _NUM, _bounded(0.0, 1.0)),
        "nt_xent_temperature": Field(0.1, "default", _NUM, _bounded(0.0, strict_lo=True)),
        "clip_temperature_init": Field(1.0, "default", _NUM, _bounded(0.0, strict_lo=True)),
    },
    "training": {
        "learning_rate": Field(1e-5, "paper", _NUM, _bounded(0.0, strict_lo=True)),
        "weight_decay": Field(0.0, "paper", _NUM, _bounded(0.0)),
        "batch_size": Field(256, "paper", (int,), _bounded(1)),
        "max_epochs": Field(100, "paper", (int,), _bounded(1)),
        "wall_clock_budget_hours": Field(96.0, "paper", _NUM, _bounded(0.0, strict_lo=True)),
        "beta1": Field(0.9, "default", _NUM, _bounded(0.0, 1.0)),
        "beta2": Field(0.999, "default", _NUM, _bounded(0.0, 1.0)),
        "adam_eps": Field(1e-8, "default", _NUM, _bounded(0.0, strict_lo=True)),
        "seed": Field(0, "default", (int,)),
        "val_fraction": Field(0.1, "default", _NUM, _bounded(0.0, 1.0)),
        "freeze_prototype_epochs": Field(0, "default", (int,), _bounded(0)),
    },
    "evaluation": {
        "composition": Field("concat_PA", "paper", (str,), _choice("single_P", "single_A", "concat_PA")),
        "folds": Field(5, "default", (int,), _bounded(2)),
        "ridge_lambda": Field(1e-3, "default", _NUM, _bounded(0.0, strict_lo=True)),
        "logistic_lambda": Field(1e-3, "default", _NUM, _bounded(0.0, strict_lo=True)),
        "max_iter": Field(500, "default", (int,), _bounded(1)),
    },
    "interpret": {
        "k": Field(15, "paper", (int,), _bounded(1)),
        "top_k": Field(3, "paper", (int,), _bounded(1)),
        "seed": Field(0, "default", (int,)),
    },
}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _resolve(schema: dict, user: dict, prefix: str):
    values, origins = {}, {}
    for key, node in schema.items():
        path = f"{prefix}{key}"
        if isinstance(node, dict):
            sub = user.get(key, {})
            if not isinstance(sub, dict):
                raise ConfigError(path, "must be a section (JSON object)")
            values[key], sub_origins = _resolve(node, sub, f"{path}.")
            origins.update(sub_origins)
        else:
            if key in user:
                v = user[key]
                # accept ints where floats are expected, but not bools
                if isinstance(v, bool) or not isinstance(v, node.types):
                    raise ConfigError(path, f"expected {'/'.join(t.__name__ for t in node.types)}")
                if node.check is not None:
                    err = node.check(v)
                    if err:
                        raise ConfigError(path, err)
                values[key] = v
                origins[path] = "user"
            else:
                values[key] = node.default
                origins[path] = node.origin
    for key in user:
        if key not in schema:
            raise ConfigError(f"{prefix}{key}", "unknown key")
    return values, origins


@dataclass
class ExperimentConfig:
    values: dict
    origins: dict

    def __getitem__(self, section):
        return self.values[section]

    def to_dict(self) -> dict:
        return {"config": self.values, "origins": self.origins}


def resolve_config(user: dict | None = None) -> ExperimentConfig:
    """Apply defaults and validate; unknown keys and out-of-range values
    are rejected with their dotted key path."""
    values, origins = _resolve(SCHEMA, user or {}, "")
    if values["data"]["root"] is None:
        values["data"]["root"] = os.environ.get(DATA_ROOT_ENV)
    return ExperimentConfig(values, origins)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as f:
        user = json.load(f)
    if not isinstance(user, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    return resolve_config(user)


def save_resolved(config: ExperimentConfig, out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "resolved_config.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(config.to_dict(), f, indent=1)
    return path
