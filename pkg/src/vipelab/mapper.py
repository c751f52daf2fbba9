"""2D mapping network: normalized 2D keypoints -> pose embedding, read out by a frozen decoder."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .camera import AugmentConfig, augment_batch, normalize_2d
from .errors import ConfigError, DimensionError, FrozenDecoderError, TrainingError
from .nn import Adam, Mlp, MlpSpec, load_checkpoint, mlp_from_state, prefixed, save_checkpoint, unprefixed
from .pose import mpjpe
from .vae import (
    TripletConfig,
    loss_mse,
    loss_mse_grad,
    loss_triplet,
    loss_triplet_grad,
    mine_triplets,
)

log = logging.getLogger(__name__)


class Mapper2D:
    def __init__(self, n_joints: int = 17, latent_dim: int = 32, hidden_dim: int = 1024,
                 n_blocks: int = 2, dropout_p: float = 0.1, use_batchnorm: bool = True,
                 rng: np.random.Generator | None = None, dtype=np.float32,
                 decoder_digest: str = "", meta: dict | None = None):
        self.n_joints = n_joints
        self.latent_dim = latent_dim
        self.encoder = Mlp(MlpSpec(2 * n_joints, latent_dim, hidden_dim, n_blocks, dropout_p,
                                   use_batchnorm), rng, dtype)
        self.decoder_digest = decoder_digest
        self.meta = dict(meta or {})

    def save(self, path) -> None:
        meta = {
            "kind": "mapper2d",
            "n_joints": self.n_joints,
            "latent_dim": self.latent_dim,
            "encoder": self.encoder.spec.to_dict(),
            "decoder_digest": self.decoder_digest,
            **self.meta,
        }
        save_checkpoint(prefixed("enc2d", self.encoder.state()), meta, path)

    @classmethod
    def load(cls, path, dtype=np.float32) -> "Mapper2D":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "mapper2d":
            raise ConfigError(f"{path} is not a mapper checkpoint")
        m = cls.__new__(cls)
        m.n_joints = meta["n_joints"]
        m.latent_dim = meta["latent_dim"]
        m.encoder = mlp_from_state(MlpSpec.from_dict(meta["encoder"]), unprefixed("enc2d", tensors), dtype)
        m.decoder_digest = meta.get("decoder_digest", "")
        m.meta = {k: v for k, v in meta.items()
                  if k not in ("kind", "n_joints", "latent_dim", "encoder", "decoder_digest")}
        return m


def encode2d(mapper: Mapper2D, poses2d) -> np.ndarray:
    """Eval-mode embeddings of ``(B, N, 2)`` normalized keypoints."""
    poses2d = np.asarray(poses2d, dtype=float)
    if poses2d.ndim != 3 or poses2d.shape[1:] != (mapper.n_joints, 2):
        raise DimensionError(f"expected (B, {mapper.n_joints}, 2) keypoints, got {poses2d.shape}")
    return mapper.encoder(poses2d.reshape(len(poses2d), -1))


def lift(mapper: Mapper2D, decoder: Mlp, poses2d, root_idx: int = 0) -> np.ndarray:
    """Raw 2D keypoints ``(N, 2)`` or ``(B, N, 2)`` to 3D poses in the decoder's frame."""
    poses2d = np.asarray(poses2d, dtype=float)
    single = poses2d.ndim == 2
    batch = normalize_2d(poses2d[None] if single else poses2d, root_idx)
    e = encode2d(mapper, batch)
    out = decoder(e).reshape(len(batch), -1, 3).astype(float)
    return out[0] if single else out


def mapper_loss_and_grads(mapper: Mapper2D, decoder: Mlp, x2d, target3d, triplet: TripletConfig,
                          w_triplet: float, rng: np.random.Generator | None, train: bool = True):
    """Reconstruction + triplet loss through the frozen (eval-mode) decoder.

    Returns ``(losses, encoder_grads)``; the decoder only receives a backward
    pass for the input gradient.
    """
    x2d = np.asarray(x2d)
    target3d = np.asarray(target3d)
    b = len(x2d)
    dtype = mapper.encoder.dtype
    e, enc_tape = mapper.encoder.forward(x2d.reshape(b, -1).astype(dtype), train, rng)
    s_hat, dec_tape = decoder.forward(e.astype(decoder.dtype), train=False)
    target = target3d.reshape(b, -1).astype(decoder.dtype)
    triplets = np.zeros((0, 3), np.int64)
    if w_triplet > 0 and b >= 3:
        triplets = mine_triplets(target3d, triplet.min_separation)
    losses = {"mse": loss_mse(target, s_hat), "triplet": loss_triplet(e, triplets, triplet.margin)}
    losses["total"] = losses["mse"] + w_triplet * losses["triplet"]
    _, g_e = decoder.backward(dec_tape, loss_mse_grad(target, s_hat).astype(decoder.dtype),
                              need_params=False)
    if w_triplet > 0:
        g_e = g_e + w_triplet * loss_triplet_grad(e, triplets, triplet.margin)
    grads, _ = mapper.encoder.backward(enc_tape, g_e.astype(dtype))
    return losses, grads


@dataclass
class MapperTrainConfig:
    hidden_dim: int = 1024
    n_blocks: int = 2
    dropout_p: float = 0.1
    use_batchnorm: bool = True
    epochs: int = 50
    batch_size: int = 128
    lr: float = 1e-3
    lr_decay: float = 1.0  # multiplies the learning rate after every epoch
    w_triplet: float = 1.0
    triplet: TripletConfig = field(default_factory=TripletConfig)
    augment: bool = False
    augment_config: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["augment_config"] = self.augment_config.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MapperTrainConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown mapper keys: {sorted(unknown)}")
        if "triplet" in d:
            d["triplet"] = TripletConfig(**d["triplet"])
        if "augment_config" in d:
            d["augment_config"] = AugmentConfig.from_dict(d["augment_config"])
        return cls(**d)


def train_mapper(poses2d, targets3d, decoder: Mlp, config: MapperTrainConfig,
                 world3d=None, label_fn: Callable | None = None,
                 on_epoch: Callable[[dict], None] | None = None, root_idx: int = 0):
    """Fit a 2D encoder so that ``decoder(encoder(x2d))`` reproduces ``targets3d``.

    ``poses2d`` are normalized keypoints. With ``config.augment`` every batch
    gains one rotated, re-projected copy of each ``world3d`` pose whose label is
    ``label_fn(rotated_world, augment_camera)``. The decoder is checked
    byte-for-byte after training.
    """
    poses2d = np.asarray(poses2d, dtype=float)
    targets3d = np.asarray(targets3d, dtype=float)
    if len(poses2d) != len(targets3d):
        raise DimensionError("poses2d and targets3d must have equal length")
    if config.augment and (world3d is None or label_fn is None):
        raise ConfigError("augmentation needs world3d poses and a label_fn")
    digest = decoder.digest()
    rng = np.random.default_rng(config.seed)
    mapper = Mapper2D(poses2d.shape[1], decoder.spec.input_dim, config.hidden_dim, config.n_blocks,
                      config.dropout_p, config.use_batchnorm, rng, decoder_digest=digest)
    opt = Adam(config.lr)
    history = []
    for epoch in range(1, config.epochs + 1):
        sums = {"mse": 0.0, "triplet": 0.0, "total": 0.0}
        n_batches = 0
        perm = rng.permutation(len(poses2d))
        for bi, start in enumerate(range(0, len(perm), config.batch_size)):
            idx = perm[start:start + config.batch_size]
            if len(idx) < 2:
                continue
            x, y = poses2d[idx], targets3d[idx]
            if config.augment:
                rotated, projected = augment_batch(world3d[idx], rng, config.augment_config, root_idx)
                x = np.concatenate([x, normalize_2d(projected, root_idx)])
                y = np.concatenate([y, label_fn(rotated, config.augment_config.camera)])
            losses, grads = mapper_loss_and_grads(mapper, decoder, x, y, config.triplet,
                                                  config.w_triplet, rng)
            if not all(math.isfinite(v) for v in losses.values()):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}: {losses}")
            opt.step(mapper.encoder.params, grads)
            for k in sums:
                sums[k] += losses[k]
            n_batches += 1
        record = {"epoch": epoch, **{k: v / max(n_batches, 1) for k, v in sums.items()}}
        history.append(record)
        opt.lr *= config.lr_decay
        log.debug("mapper epoch %d %s", epoch, record)
        if on_epoch:
            on_epoch(record)
    if decoder.digest() != digest:
        raise FrozenDecoderError("decoder parameters changed during mapper training")
    return mapper, history


def heldout_mpjpe(mapper: Mapper2D, decoder: Mlp, poses2d, targets3d) -> float:
    """Mean MPJPE of lifted normalized keypoints against their 3D labels."""
    e = encode2d(mapper, poses2d)
    pred = decoder(e).reshape(len(e), -1, 3)
    return float(np.mean(mpjpe(pred, targets3d)))
