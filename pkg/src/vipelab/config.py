"""Experiment configuration: one JSON document with a section per module.

::

    {
      "seed": 0,
      "workers": 4,
      "skeleton": null,                      # path to a skeleton file, null = built-in
      "synth":  {"n_poses": 5000, "rig": [...], "splits": [0.8, 0.1, 0.1], ...},
      "vae":    {"epochs": 100, "hidden_dim": 1024, "weights": {"mse": 1, "kl": 1, "triplet": 1}, ...},
      "mapper": {"epochs": 50, "w_triplet": 1.0, "augment": false, ...},
      "eval":   {"train_cameras": [0, 1, 2, 3], "heldout_cameras": [4, 5], "split": "test",
                 "canonical_rotation": true, "ks": [1, 10, 20], "threshold": 0.1, "exclude_self": false}
    }

Every key is optional. Command-line flags override file values; the
``VIPELAB_SEED`` and ``VIPELAB_WORKERS`` environment variables override the
file but not the flags.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

from .errors import ConfigError
from .experiment import ExperimentConfig
from .mapper import MapperTrainConfig
from .retrieval import HitConfig
from .skeleton import Skeleton, default_skeleton, load_skeleton
from .synth import GeneratorConfig
from .vae import VaeTrainConfig

SECTIONS = {"seed", "workers", "skeleton", "synth", "vae", "mapper", "eval"}
EVAL_KEYS = {"train_cameras", "heldout_cameras", "split", "canonical_rotation", "ks", "threshold",
             "exclude_self"}


def load_config(path: str | Path | None) -> dict:
    if path is None:
        doc = {}
    else:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
    unknown = set(doc) - SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    unknown = set(doc.get("eval", {})) - EVAL_KEYS
    if unknown:
        raise ConfigError(f"unknown eval keys: {sorted(unknown)}")
    if doc.get("skeleton") and path is not None:
        skel_path = Path(doc["skeleton"])
        if not skel_path.is_absolute():
            doc["skeleton"] = str(Path(path).parent / skel_path)
    return doc


def resolve_seed(doc: dict, flag: int | None) -> int:
    if flag is not None:
        return flag
    if "VIPELAB_SEED" in os.environ:
        return int(os.environ["VIPELAB_SEED"])
    return int(doc.get("seed", 0))


def resolve_workers(doc: dict, flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    if "VIPELAB_WORKERS" in os.environ:
        return max(1, int(os.environ["VIPELAB_WORKERS"]))
    return max(1, int(doc.get("workers", os.cpu_count() or 1)))


def skeleton_from(doc: dict) -> Skeleton:
    return load_skeleton(doc["skeleton"]) if doc.get("skeleton") else default_skeleton()


def generator_config(doc: dict, seed: int, **overrides) -> GeneratorConfig:
    section = {**doc.get("synth", {}), "seed": seed}
    section.update({k: v for k, v in overrides.items() if v is not None})
    return GeneratorConfig.from_dict(section)


def vae_config(doc: dict, seed: int, **overrides) -> VaeTrainConfig:
    section = {**doc.get("vae", {}), "seed": seed}
    weights = dict(section.get("weights", {}))
    for key in ("kl", "triplet", "mse"):
        val = overrides.pop(f"w_{key}", None)
        if val is not None:
            weights[key] = val
    if weights:
        section["weights"] = weights
    section.update({k: v for k, v in overrides.items() if v is not None})
    return VaeTrainConfig.from_dict(section)


def mapper_config(doc: dict, seed: int, **overrides) -> MapperTrainConfig:
    section = {**doc.get("mapper", {}), "seed": seed}
    section.update({k: v for k, v in overrides.items() if v is not None})
    return MapperTrainConfig.from_dict(section)


def hit_config(doc: dict, ks=None, threshold=None, exclude_self=None) -> HitConfig:
    ev = doc.get("eval", {})
    return HitConfig(
        ks=tuple(ks if ks is not None else ev.get("ks", (1, 10, 20))),
        threshold=float(threshold if threshold is not None else ev.get("threshold", 0.1)),
        exclude_self=bool(exclude_self if exclude_self is not None else ev.get("exclude_self", False)),
    )


def experiment_config(doc: dict, seed: int, vae: VaeTrainConfig | None = None,
                      mapper: MapperTrainConfig | None = None, hit: HitConfig | None = None,
                      canonical_rotation: bool | None = None) -> ExperimentConfig:
    ev = doc.get("eval", {})
    return ExperimentConfig(
        train_cameras=list(ev.get("train_cameras", [0, 1, 2, 3])),
        heldout_cameras=list(ev.get("heldout_cameras", [4, 5])),
        eval_split=ev.get("split", "test"),
        canonical_rotation=bool(ev.get("canonical_rotation", True)
                                if canonical_rotation is None else canonical_rotation),
        vae=vae or vae_config(doc, seed),
        mapper=mapper or mapper_config(doc, seed),
        hit=hit or hit_config(doc),
    )
