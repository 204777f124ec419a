"""Checkpoint files: one JSON document holding all four modules' parameters."""

from __future__ import annotations

import json
import os

import numpy as np

from ..neural.mlp import MlpParams, MlpSpec
from .models import FilterModels

_FORMAT_VERSION = 1
_MODULE_NAMES = ("transition", "observation", "noise", "sensor")


class CheckpointMissing(FileNotFoundError):
    """No checkpoint file at the given path."""


def _spec_to_dict(spec: MlpSpec) -> dict:
    return {
        "in_dim": spec.in_dim,
        "hidden": list(spec.hidden),
        "out_dim": spec.out_dim,
        "stochastic": list(spec.stochastic),
    }


def _params_to_dict(params: MlpParams) -> dict:
    return {
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def save_checkpoint(models: FilterModels, path, training_meta: dict | None = None) -> None:
    models.validate()
    doc = {
        "format_version": _FORMAT_VERSION,
        "window": models.window,
        "dropout": models.dropout,
        "state_dim": models.state_dim,
        "raw_dim": models.raw_dim,
        "modules": {
            name: {
                "spec": _spec_to_dict(getattr(models, f"{name}_spec")),
                **_params_to_dict(getattr(models, name)),
            }
            for name in _MODULE_NAMES
        },
        "training": training_meta or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path) -> tuple[FilterModels, dict]:
    """Load and validate a checkpoint; returns (models, training metadata)."""
    if not os.path.exists(path):
        raise CheckpointMissing(f"no checkpoint at {path}")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != _FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    specs: dict[str, MlpSpec] = {}
    params: dict[str, MlpParams] = {}
    try:
        for name in _MODULE_NAMES:
            mod = doc["modules"][name]
            spec = mod["spec"]
            specs[name] = MlpSpec(
                in_dim=int(spec["in_dim"]),
                hidden=tuple(int(h) for h in spec["hidden"]),
                out_dim=int(spec["out_dim"]),
                stochastic=tuple(bool(s) for s in spec["stochastic"]),
            )
            params[name] = MlpParams(
                weights=[np.asarray(w, dtype=np.float64) for w in mod["weights"]],
                biases=[np.asarray(b, dtype=np.float64) for b in mod["biases"]],
            )
        models = FilterModels(
            transition_spec=specs["transition"],
            observation_spec=specs["observation"],
            noise_spec=specs["noise"],
            sensor_spec=specs["sensor"],
            transition=params["transition"],
            observation=params["observation"],
            noise=params["noise"],
            sensor=params["sensor"],
            window=int(doc["window"]),
            dropout=float(doc["dropout"]),
        )
    except KeyError as exc:
        raise ValueError(f"checkpoint missing field {exc}") from exc
    models.validate()
    return models, doc.get("training", {})
