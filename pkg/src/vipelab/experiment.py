"""End-to-end desk-scale pipeline: labels, VAE, mapper, cross-view evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.stats import spearmanr

from .camera import Camera, normalize_2d, to_camera
from .errors import ConfigError
from .mapper import Mapper2D, MapperTrainConfig, encode2d, train_mapper
from .nn import Mlp
from .pose import canonicalize, normalize_scale, root_center
from .retrieval import EmbeddingIndex, HitConfig, hit_at_k_rig, mpjpe_eval
from .skeleton import Skeleton
from .synth import Dataset
from .vae import VaeModel, VaeTrainConfig, encode, train_vae

log = logging.getLogger(__name__)


def camera_frame_pose(world, cam: Camera, skel: Skeleton) -> np.ndarray:
    """Root-centered, scale-normalized pose in the coordinates of ``cam``."""
    return normalize_scale(root_center(to_camera(world, cam, skel.root_idx), skel))


def label_poses(world, cam: Camera, skel: Skeleton, canonical_rotation: bool = True) -> np.ndarray:
    """3D training label for ``world`` poses observed by ``cam``.

    With canonical rotation the label is view independent; without it (the
    ablation) the label is the normalized pose in the camera's frame.
    """
    if canonical_rotation:
        return canonicalize(world, skel)
    return camera_frame_pose(world, cam, skel)


@dataclass
class ExperimentConfig:
    train_cameras: list[int] = field(default_factory=lambda: [0, 1, 2, 3])
    heldout_cameras: list[int] = field(default_factory=lambda: [4, 5])
    eval_split: str = "test"
    canonical_rotation: bool = True
    vae: VaeTrainConfig = field(default_factory=VaeTrainConfig)
    mapper: MapperTrainConfig = field(default_factory=MapperTrainConfig)
    hit: HitConfig = field(default_factory=HitConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown experiment keys: {sorted(unknown)}")
        if "vae" in d:
            d["vae"] = VaeTrainConfig.from_dict(d["vae"])
        if "mapper" in d:
            d["mapper"] = MapperTrainConfig.from_dict(d["mapper"])
        if "hit" in d:
            h = dict(d["hit"])
            if "ks" in h:
                h["ks"] = tuple(h["ks"])
            d["hit"] = HitConfig(**h)
        return cls(**d)


def vae_training_poses(ds: Dataset, cameras, canonical_rotation: bool, split: str = "train"):
    """``(labels, world)`` for VAE training: one per pose, or one per (pose, camera) in the ablation."""
    _, world = ds.poses(split)
    if canonical_rotation:
        return canonicalize(world, ds.skeleton), world
    labels = [camera_frame_pose(world, ds.cameras[c], ds.skeleton) for c in cameras]
    return np.concatenate(labels), np.concatenate([world] * len(cameras))


def mapper_training_data(ds: Dataset, cameras, canonical_rotation: bool, split: str = "train"):
    """Normalized 2D inputs, 3D labels and world poses for the records of ``cameras``."""
    xs, ys, ws = [], [], []
    for c in cameras:
        idx = ds.select(split, [c])
        world = ds.joints3d[idx]
        xs.append(normalize_2d(ds.joints2d[idx], ds.skeleton.root_idx))
        ys.append(label_poses(world, ds.cameras[c], ds.skeleton, canonical_rotation))
        ws.append(world)
    return np.concatenate(xs), np.concatenate(ys), np.concatenate(ws)


def mapper_indexes(mapper: Mapper2D, ds: Dataset, cameras, split: str) -> dict[int, EmbeddingIndex]:
    out = {}
    for c in cameras:
        idx = ds.select(split, [c])
        x = normalize_2d(ds.joints2d[idx], ds.skeleton.root_idx)
        out[c] = EmbeddingIndex(ds.ids[idx], ds.camera_ids[idx], encode2d(mapper, x),
                                canonicalize(ds.joints3d[idx], ds.skeleton))
    return out


def keypoint_indexes(ds: Dataset, cameras, split: str) -> dict[int, EmbeddingIndex]:
    """Indexes keyed by flattened normalized 2D keypoints (the 2D baseline)."""
    out = {}
    for c in cameras:
        idx = ds.select(split, [c])
        x = normalize_2d(ds.joints2d[idx], ds.skeleton.root_idx)
        out[c] = EmbeddingIndex(ds.ids[idx], ds.camera_ids[idx], x.reshape(len(x), -1),
                                canonicalize(ds.joints3d[idx], ds.skeleton))
    return out


def gt3d_indexes(vae: VaeModel, ds: Dataset, cameras, split: str,
                 canonical_rotation: bool = True) -> dict[int, EmbeddingIndex]:
    """Embed each camera's 3D observation through the VAE encoder (mu)."""
    out = {}
    for c in cameras:
        idx = ds.select(split, [c])
        # the pose as this camera sees it, in its own coordinate frame
        observed = to_camera(ds.joints3d[idx], ds.cameras[c], ds.skeleton.root_idx)
        x = canonicalize(observed, ds.skeleton, rotate=canonical_rotation)
        mu, _, _ = encode(vae, x, check=False)
        out[c] = EmbeddingIndex(ds.ids[idx], ds.camera_ids[idx], mu,
                                canonicalize(ds.joints3d[idx], ds.skeleton))
    return out


def heldout_pairs(train_cams, heldout_cams) -> list[tuple[int, int]]:
    """Ordered pairs joining one training camera with one held-out camera, both directions."""
    pairs = [(a, b) for a in train_cams for b in heldout_cams]
    return pairs + [(b, a) for a, b in pairs]


def embedding_spearman(vae: VaeModel, canonical_poses, n_pairs: int = 2000, seed: int = 0) -> float:
    """Rank correlation between embedding distance and 3D MPJPE over random pose pairs."""
    rng = np.random.default_rng(seed)
    mu, _, _ = encode(vae, canonical_poses, check=False)
    i = rng.integers(0, len(mu), n_pairs)
    j = rng.integers(0, len(mu), n_pairs)
    keep = i != j
    d_emb = np.linalg.norm(mu[i[keep]] - mu[j[keep]], axis=1)
    d_3d = np.linalg.norm(canonical_poses[i[keep]] - canonical_poses[j[keep]], axis=-1).mean(-1)
    return float(spearmanr(d_emb, d_3d).statistic)


@dataclass
class ExperimentResult:
    vae: VaeModel
    mapper: Mapper2D
    vae_log: list
    mapper_log: list
    mapper_hits: dict
    baseline_hits: dict
    mpjpe: dict

    def summary(self) -> dict:
        return {
            "mapper": self.mapper_hits["average"],
            "baseline_2d": self.baseline_hits["average"],
            "mpjpe": self.mpjpe,
        }


def train_models(ds: Dataset, cfg: ExperimentConfig, on_epoch=None):
    skel = ds.skeleton
    if cfg.vae.augment and cfg.canonical_rotation:
        log.warning("VAE augmentation with canonical rotation only duplicates each pose; "
                    "the duplicates become every anchor's triplet positive")
    vae_x, vae_world = vae_training_poses(ds, cfg.train_cameras, cfg.canonical_rotation)
    aug_cam = cfg.vae.augment_config.camera
    preprocess = partial(label_poses, cam=aug_cam, skel=skel, canonical_rotation=cfg.canonical_rotation)
    vae, vae_log = train_vae(vae_x, cfg.vae, preprocess=preprocess, world_poses=vae_world,
                             on_epoch=on_epoch)
    vae.meta.update(canonical_rotation=cfg.canonical_rotation, skeleton=skel.to_dict())
    x2d, y3d, world = mapper_training_data(ds, cfg.train_cameras, cfg.canonical_rotation)
    label_fn = partial(label_poses, skel=skel, canonical_rotation=cfg.canonical_rotation)
    mapper, mapper_log = train_mapper(x2d, y3d, vae.decoder, cfg.mapper, world3d=world,
                                      label_fn=label_fn, on_epoch=on_epoch, root_idx=skel.root_idx)
    mapper.meta["canonical_rotation"] = cfg.canonical_rotation
    return vae, vae_log, mapper, mapper_log


def evaluate(ds: Dataset, mapper: Mapper2D, decoder: Mlp, cfg: ExperimentConfig, workers: int = 1,
             canonical_rotation: bool | None = None):
    """Mapper and 2D-baseline Hit@k on held-out camera pairs, plus lifting MPJPE."""
    canonical_rotation = cfg.canonical_rotation if canonical_rotation is None else canonical_rotation
    cams = list(cfg.train_cameras) + list(cfg.heldout_cameras)
    pairs = heldout_pairs(cfg.train_cameras, cfg.heldout_cameras) if cfg.heldout_cameras else None
    mapper_hits = hit_at_k_rig(mapper_indexes(mapper, ds, cams, cfg.eval_split), cfg.hit, pairs,
                               workers, ds.skeleton.root_idx)
    baseline_hits = hit_at_k_rig(keypoint_indexes(ds, cams, cfg.eval_split), cfg.hit, pairs,
                                 workers, ds.skeleton.root_idx)
    errors = {}
    for group, group_cams in (("train_cameras", cfg.train_cameras), ("heldout_cameras", cfg.heldout_cameras)):
        if not group_cams:
            continue
        x, y, _ = mapper_training_data(ds, group_cams, canonical_rotation, cfg.eval_split)
        pred = decoder(encode2d(mapper, x)).reshape(len(x), -1, 3).astype(float)
        errors[group] = {
            "mpjpe": mpjpe_eval(pred, y),
            "pa_mpjpe": mpjpe_eval(pred, y, aligned=True, root_idx=ds.skeleton.root_idx),
        }
    return mapper_hits, baseline_hits, errors


def run_experiment(ds: Dataset, cfg: ExperimentConfig, workers: int = 1, on_epoch=None) -> ExperimentResult:
    vae, vae_log, mapper, mapper_log = train_models(ds, cfg, on_epoch)
    mapper_hits, baseline_hits, errors = evaluate(ds, mapper, vae.decoder, cfg, workers)
    return ExperimentResult(vae, mapper, vae_log, mapper_log, mapper_hits, baseline_hits, errors)


def random_pair_mpjpe(poses, n_pairs: int = 2000, seed: int = 0) -> float:
    """Chance-level error: mean MPJPE between random distinct pose pairs."""
    poses = np.asarray(poses, dtype=float)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(poses), n_pairs)
    j = rng.integers(0, len(poses), n_pairs)
    keep = i != j
    return float(np.mean(np.linalg.norm(poses[i[keep]] - poses[j[keep]], axis=-1).mean(-1)))

