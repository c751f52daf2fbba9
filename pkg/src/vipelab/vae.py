"""3D pose VAE: encoder to (mu, log-variance), reparameterized sample, decoder.

Training minimizes ``w_mse * L_mse + w_kl * L_KL + w_triplet * L_triplet`` where
triplets are mined in 3D pose space and their loss is measured between
embeddings.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .camera import AugmentConfig, augment_batch
from .errors import (
    ConfigError,
    DimensionError,
    MiningError,
    NonCanonicalInputWarning,
    TrainingError,
)
from .nn import Adam, Mlp, MlpSpec, load_checkpoint, mlp_from_state, prefixed, save_checkpoint, unprefixed
from .pose import mpjpe

log = logging.getLogger(__name__)

LOGVAR_CLAMP = 10.0


@dataclass(frozen=True)
class TripletConfig:
    margin: float = 1.0
    min_separation: float = 0.1

    def __post_init__(self):
        if not self.margin > 0:
            raise ConfigError("triplet margin must be > 0")
        if self.min_separation < 0:
            raise ConfigError("min_separation must be >= 0")


@dataclass(frozen=True)
class LossWeights:
    mse: float = 1.0
    kl: float = 1.0
    triplet: float = 1.0

    def __post_init__(self):
        if min(self.mse, self.kl, self.triplet) < 0:
            raise ConfigError("loss weights must be >= 0")


class VaeModel:
    def __init__(self, n_joints: int = 17, latent_dim: int = 32, hidden_dim: int = 1024,
                 n_blocks: int = 2, dropout_p: float = 0.1, use_batchnorm: bool = True,
                 rng: np.random.Generator | None = None, dtype=np.float32,
                 meta: dict | None = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_joints = n_joints
        self.latent_dim = latent_dim
        common = dict(hidden_dim=hidden_dim, n_blocks=n_blocks, dropout_p=dropout_p,
                      use_batchnorm=use_batchnorm)
        self.encoder = Mlp(MlpSpec(3 * n_joints, 2 * latent_dim, **common), rng, dtype)
        self.decoder = Mlp(MlpSpec(latent_dim, 3 * n_joints, **common), rng, dtype)
        self.meta = dict(meta or {})

    def save(self, path) -> None:
        meta = {
            "kind": "vae",
            "n_joints": self.n_joints,
            "latent_dim": self.latent_dim,
            "encoder": self.encoder.spec.to_dict(),
            "decoder": self.decoder.spec.to_dict(),
            **self.meta,
        }
        tensors = {**prefixed("enc", self.encoder.state()), **prefixed("dec", self.decoder.state())}
        save_checkpoint(tensors, meta, path)

    @classmethod
    def load(cls, path, dtype=np.float32) -> "VaeModel":
        tensors, meta = load_checkpoint(path)
        if meta.get("kind") != "vae":
            raise ConfigError(f"{path} is not a VAE checkpoint")
        model = cls.__new__(cls)
        model.n_joints = meta["n_joints"]
        model.latent_dim = meta["latent_dim"]
        model.encoder = mlp_from_state(MlpSpec.from_dict(meta["encoder"]), unprefixed("enc", tensors), dtype)
        model.decoder = mlp_from_state(MlpSpec.from_dict(meta["decoder"]), unprefixed("dec", tensors), dtype)
        model.meta = {k: v for k, v in meta.items()
                      if k not in ("kind", "n_joints", "latent_dim", "encoder", "decoder")}
        return model


def load_decoder(path, dtype=np.float32) -> Mlp:
    """The decoder half of a VAE checkpoint."""
    return VaeModel.load(path, dtype).decoder


def _check_canonical(poses: np.ndarray, tol: float = 1e-3) -> None:
    root_off = np.abs(poses[:, 0, :]).max() if len(poses) else 0.0
    rms = np.sqrt((poses ** 2).sum(-1).mean(-1)) if len(poses) else np.ones(1)
    if root_off > tol or np.abs(rms - 1).max() > tol:
        warnings.warn("encoder input does not look canonical (root at origin, unit RMS radius)",
                      NonCanonicalInputWarning, stacklevel=3)


def encode(model: VaeModel, poses, train: bool = False, rng: np.random.Generator | None = None,
           check: bool = True):
    """Return ``(mu, logvar, e)``; ``e`` is a reparameterized sample in training, ``mu`` otherwise."""
    poses = np.asarray(poses, dtype=float)
    if poses.ndim != 3 or poses.shape[1:] != (model.n_joints, 3):
        raise DimensionError(f"expected (B, {model.n_joints}, 3) poses, got {poses.shape}")
    if check:
        _check_canonical(poses)
    out, _ = model.encoder.forward(poses.reshape(len(poses), -1), train, rng)
    n = model.latent_dim
    mu = out[:, :n]
    logvar = np.clip(out[:, n:], -LOGVAR_CLAMP, LOGVAR_CLAMP)
    if not train:
        return mu, logvar, mu
    eps = rng.standard_normal(mu.shape).astype(mu.dtype)
    return mu, logvar, mu + np.exp(0.5 * logvar) * eps


def decode(model_or_decoder, e) -> np.ndarray:
    """Eval-mode decode of ``(B, n)`` embeddings to ``(B, N, 3)`` poses."""
    dec = model_or_decoder.decoder if isinstance(model_or_decoder, VaeModel) else model_or_decoder
    e = np.atleast_2d(np.asarray(e))
    out = dec(e)
    return out.reshape(len(e), -1, 3)


# --- losses -------------------------------------------------------------------

def loss_mse(s, s_hat) -> float:
    """Mean squared error over every coordinate."""
    s, s_hat = np.asarray(s, dtype=float), np.asarray(s_hat, dtype=float)
    if s.shape != s_hat.shape:
        raise DimensionError(f"shape mismatch {s.shape} vs {s_hat.shape}")
    return float(np.mean((s - s_hat) ** 2))


def loss_mse_grad(s, s_hat) -> np.ndarray:
    """Gradient of ``loss_mse`` with respect to ``s_hat``."""
    return 2.0 * (s_hat - s) / s.size


def loss_kl(mu, logvar) -> float:
    """KL(N(mu, exp(logvar)) || N(0, I)), summed over dims, averaged over the batch."""
    mu, logvar = np.atleast_2d(mu).astype(float), np.atleast_2d(logvar).astype(float)
    return float(np.mean(0.5 * (mu ** 2 + np.exp(logvar) - 1.0 - logvar).sum(axis=1)))


def loss_kl_grad(mu, logvar) -> tuple[np.ndarray, np.ndarray]:
    b = mu.shape[0]
    return mu / b, 0.5 * (np.exp(logvar) - 1.0) / b


def pairwise_mpjpe(poses) -> np.ndarray:
    poses = np.asarray(poses, dtype=float)
    return np.linalg.norm(poses[:, None] - poses[None], axis=-1).mean(axis=-1)


def mine_triplets(poses, min_separation: float = 0.1) -> np.ndarray:
    """Anchor/positive/negative indices mined by 3D MPJPE within a batch.

    The positive is the closest other pose; the negative is the next pose in
    distance order that is at least ``min_separation`` farther from the anchor
    than the positive. Anchors with no such pose are skipped.
    """
    poses = np.asarray(poses, dtype=float)
    b = len(poses)
    if b < 3:
        raise MiningError(f"triplet mining needs a batch of at least 3, got {b}")
    dist = pairwise_mpjpe(poses)
    out = []
    for i in range(b):
        others = np.r_[0:i, i + 1:b]
        order = others[np.argsort(dist[i, others], kind="stable")]
        j = order[0]
        far = order[1:][dist[i, order[1:]] - dist[i, j] >= min_separation]
        if len(far):
            out.append((i, j, far[0]))
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def loss_triplet(emb, triplets, margin: float = 1.0) -> float:
    emb = np.asarray(emb, dtype=float)
    triplets = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    if len(triplets) == 0:
        return 0.0
    i, j, k = triplets.T
    d_pos = np.linalg.norm(emb[i] - emb[j], axis=1)
    d_neg = np.linalg.norm(emb[i] - emb[k], axis=1)
    return float(np.mean(np.maximum(0.0, d_pos - d_neg + margin)))


def loss_triplet_grad(emb, triplets, margin: float = 1.0, eps: float = 1e-12) -> np.ndarray:
    emb = np.asarray(emb)
    grad = np.zeros_like(emb)
    triplets = np.asarray(triplets, dtype=np.int64).reshape(-1, 3)
    if len(triplets) == 0:
        return grad
    i, j, k = triplets.T
    v_pos = emb[i] - emb[j]
    v_neg = emb[i] - emb[k]
    d_pos = np.linalg.norm(v_pos, axis=1, keepdims=True)
    d_neg = np.linalg.norm(v_neg, axis=1, keepdims=True)
    active = ((d_pos - d_neg + margin) > 0) / len(triplets)
    u_pos = v_pos / np.maximum(d_pos, eps) * active
    u_neg = v_neg / np.maximum(d_neg, eps) * active
    np.add.at(grad, i, u_pos - u_neg)
    np.add.at(grad, j, -u_pos)
    np.add.at(grad, k, u_neg)
    return grad


# --- one training step ------------------------------------------------------

def vae_loss_and_grads(model: VaeModel, poses, weights: LossWeights, triplet: TripletConfig,
                       rng: np.random.Generator, train: bool = True, mine_on=None):
    """Loss components and parameter gradients for one batch.

    ``mine_on`` overrides the poses used for triplet mining (defaults to the batch).
    Returns ``(losses, enc_grads, dec_grads)``.
    """
    poses = np.asarray(poses)
    b = len(poses)
    dtype = model.encoder.dtype
    x = poses.reshape(b, -1).astype(dtype)
    n = model.latent_dim
    out, enc_tape = model.encoder.forward(x, train, rng)
    mu, raw_lv = out[:, :n], out[:, n:]
    lv = np.clip(raw_lv, -LOGVAR_CLAMP, LOGVAR_CLAMP)
    std = np.exp(0.5 * lv)
    eps = rng.standard_normal(mu.shape).astype(dtype) if train else np.zeros_like(mu)
    e = mu + std * eps
    s_hat, dec_tape = model.decoder.forward(e, train, rng)

    triplets = np.zeros((0, 3), np.int64)
    if weights.triplet > 0 and b >= 3:
        triplets = mine_triplets(poses if mine_on is None else mine_on, triplet.min_separation)
    losses = {
        "mse": loss_mse(x, s_hat),
        "kl": loss_kl(mu, lv),
        "triplet": loss_triplet(e, triplets, triplet.margin),
    }
    losses["total"] = weights.mse * losses["mse"] + weights.kl * losses["kl"] \
        + weights.triplet * losses["triplet"]

    g_shat = (weights.mse * loss_mse_grad(x, s_hat)).astype(dtype)
    dec_grads, g_e = model.decoder.backward(dec_tape, g_shat)
    if weights.triplet > 0:
        g_e = g_e + weights.triplet * loss_triplet_grad(e, triplets, triplet.margin)
    g_mu, g_lv = loss_kl_grad(mu, lv)
    g_mu = weights.kl * g_mu + g_e
    g_lv = weights.kl * g_lv + g_e * eps * 0.5 * std
    g_lv = g_lv * (np.abs(raw_lv) <= LOGVAR_CLAMP)
    enc_grads, _ = model.encoder.backward(enc_tape, np.concatenate([g_mu, g_lv], axis=1).astype(dtype))
    return losses, enc_grads, dec_grads


# --- training -----------------------------------------------------------------

@dataclass
class VaeTrainConfig:
    latent_dim: int = 32
    hidden_dim: int = 1024
    n_blocks: int = 2
    dropout_p: float = 0.1
    use_batchnorm: bool = True
    epochs: int = 100
    batch_size: int = 128
    lr: float = 1e-3
    lr_decay: float = 1.0  # multiplies the learning rate after every epoch
    weights: LossWeights = field(default_factory=LossWeights)
    triplet: TripletConfig = field(default_factory=TripletConfig)
    augment: bool = False
    augment_config: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0
    target_mpjpe: float | None = None
    eval_every: int = 10

    def to_dict(self) -> dict:
        d = asdict(self)
        d["augment_config"] = self.augment_config.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VaeTrainConfig":
        d = dict(d)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown vae keys: {sorted(unknown)}")
        if "weights" in d:
            d["weights"] = LossWeights(**d["weights"])
        if "triplet" in d:
            d["triplet"] = TripletConfig(**d["triplet"])
        if "augment_config" in d:
            d["augment_config"] = AugmentConfig.from_dict(d["augment_config"])
        return cls(**d)


def reconstruction_mpjpe(model: VaeModel, poses, batch_size: int = 1024) -> float:
    """Mean MPJPE between poses and their eval-mode (mu) reconstructions."""
    poses = np.asarray(poses, dtype=float)
    errs = []
    for start in range(0, len(poses), batch_size):
        chunk = poses[start:start + batch_size]
        mu, _, _ = encode(model, chunk, check=False)
        errs.append(mpjpe(chunk, decode(model, mu)))
    return float(np.mean(np.concatenate([np.atleast_1d(e) for e in errs])))


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = perm[start:start + batch_size]
        if len(idx) >= 2 or n < 2:
            yield idx


def train_vae(poses, config: VaeTrainConfig, preprocess: Callable | None = None,
              world_poses=None, on_epoch: Callable[[dict], None] | None = None,
              model: VaeModel | None = None):
    """Train a VAE on preprocessed ``(P, N, 3)`` poses.

    With ``config.augment``, each batch is doubled with randomly rotated copies
    of ``world_poses`` (defaults to ``poses``) passed through ``preprocess``.
    Returns ``(model, log)`` where ``log`` has one record per epoch.
    """
    poses = np.asarray(poses, dtype=float)
    if config.augment and preprocess is None:
        raise ConfigError("augmentation needs a preprocess function")
    world = poses if world_poses is None else np.asarray(world_poses, dtype=float)
    rng = np.random.default_rng(config.seed)
    if model is None:
        model = VaeModel(poses.shape[1], config.latent_dim, config.hidden_dim, config.n_blocks,
                         config.dropout_p, config.use_batchnorm, rng)
    opt_enc = Adam(config.lr)
    opt_dec = Adam(config.lr)
    history = []
    for epoch in range(1, config.epochs + 1):
        sums = {"mse": 0.0, "kl": 0.0, "triplet": 0.0, "total": 0.0}
        n_batches = 0
        for bi, idx in enumerate(_batches(len(poses), config.batch_size, rng)):
            batch = poses[idx]
            if config.augment:
                rotated, _ = augment_batch(world[idx], rng, config.augment_config)
                batch = np.concatenate([batch, preprocess(rotated)])
            losses, g_enc, g_dec = vae_loss_and_grads(model, batch, config.weights, config.triplet, rng)
            if not all(math.isfinite(v) for v in losses.values()):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}: {losses}")
            opt_enc.step(model.encoder.params, g_enc)
            opt_dec.step(model.decoder.params, g_dec)
            for k in sums:
                sums[k] += losses[k]
            n_batches += 1
        record = {"epoch": epoch, **{k: v / max(n_batches, 1) for k, v in sums.items()}}
        check = config.target_mpjpe is not None and (epoch % config.eval_every == 0 or epoch == config.epochs)
        if check:
            record["recon_mpjpe"] = reconstruction_mpjpe(model, poses)
        history.append(record)
        opt_enc.lr *= config.lr_decay
        opt_dec.lr *= config.lr_decay
        log.debug("vae epoch %d %s", epoch, record)
        if on_epoch:
            on_epoch(record)
        if check and record["recon_mpjpe"] < config.target_mpjpe:
            break
    return model, history
