"""A small dense-network stack with hand-written reverse-mode gradients.

The architecture is the residual MLP used for 2D-to-3D lifting baselines:

    input linear -> n_blocks x [ (linear -> batchnorm -> relu -> dropout) x 2 + skip ] -> output linear

Every layer is a pair of ``*_forward`` / ``*_backward`` functions operating on
``(batch, features)`` arrays. ``Mlp`` chains them and keeps a tape of the
intermediates so ``backward`` can replay them in reverse.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import CheckpointCorruptError, ConfigError, DimensionError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1
# leaky-relu slope used for the Kaiming-uniform bound (bound = 1/sqrt(fan_in))
KAIMING_A = 5 ** 0.5


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    output_dim: int
    hidden_dim: int = 1024
    n_blocks: int = 2
    dropout_p: float = 0.1
    use_batchnorm: bool = True

    def __post_init__(self):
        if min(self.input_dim, self.output_dim, self.hidden_dim) <= 0 or self.n_blocks < 0:
            raise ConfigError("network dimensions must be positive")
        if not 0 <= self.dropout_p < 1:
            raise ConfigError("dropout_p must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MlpSpec":
        return cls(**d)


# --- layers -----------------------------------------------------------------

def linear_forward(x, w, b):
    return x @ w + b, (x, w)


def linear_backward(cache, gy, need_params=True):
    x, w = cache
    gx = gy @ w.T
    if not need_params:
        return gx, None, None
    return gx, x.T @ gy, gy.sum(axis=0)


def relu_forward(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(mask, gy):
    return gy * mask


def dropout_forward(x, p, train, rng):
    """Inverted dropout; identity (mask ``None``) outside training."""
    if not train or p == 0:
        return x, None
    keep = rng.random(x.shape) >= p
    mask = keep.astype(x.dtype) / x.dtype.type(1 - p)
    return x * mask, mask


def dropout_backward(mask, gy):
    return gy if mask is None else gy * mask


def batchnorm_forward(x, gamma, beta, running_mean, running_var, train,
                      momentum=BN_MOMENTUM, eps=BN_EPS):
    """Batch normalization over axis 0. Updates the running buffers in place when training."""
    if train:
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        n = x.shape[0]
        running_mean *= 1 - momentum
        running_mean += momentum * mu
        unbiased = var * (n / (n - 1)) if n > 1 else var
        running_var *= 1 - momentum
        running_var += momentum * unbiased
    else:
        mu, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return gamma * xhat + beta, (xhat, inv_std, gamma, train)


def batchnorm_backward(cache, gy, need_params=True):
    xhat, inv_std, gamma, train = cache
    gxhat = gy * gamma
    if train:
        n = gy.shape[0]
        gx = inv_std / n * (n * gxhat - gxhat.sum(axis=0) - xhat * (gxhat * xhat).sum(axis=0))
    else:
        gx = gxhat * inv_std
    if not need_params:
        return gx, None, None
    return gx, (gy * xhat).sum(axis=0), gy.sum(axis=0)


# --- network ----------------------------------------------------------------

def _kaiming_uniform(rng, fan_in, fan_out, dtype):
    bound = np.sqrt(6.0 / ((1 + KAIMING_A ** 2) * fan_in))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)


class Mlp:
    """Residual MLP with named parameters and batchnorm running buffers."""

    def __init__(self, spec: MlpSpec, rng: np.random.Generator | None = None, dtype=np.float32):
        self.spec = spec
        self.dtype = np.dtype(dtype)
        rng = rng if rng is not None else np.random.default_rng(0)
        h = spec.hidden_dim
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._add_linear("in", spec.input_dim, h, rng)
        for i in range(spec.n_blocks):
            for l in range(2):
                name = f"blocks.{i}.{l}"
                self._add_linear(name, h, h, rng)
                if spec.use_batchnorm:
                    self.params[f"{name}.bn.gamma"] = np.ones(h, self.dtype)
                    self.params[f"{name}.bn.beta"] = np.zeros(h, self.dtype)
                    self.buffers[f"{name}.bn.running_mean"] = np.zeros(h, self.dtype)
                    self.buffers[f"{name}.bn.running_var"] = np.ones(h, self.dtype)
        self._add_linear("out", h, spec.output_dim, rng)

    def _add_linear(self, name, fan_in, fan_out, rng):
        self.params[f"{name}.W"] = _kaiming_uniform(rng, fan_in, fan_out, self.dtype)
        self.params[f"{name}.b"] = np.zeros(fan_out, self.dtype)

    def forward(self, x, train: bool = False, rng: np.random.Generator | None = None):
        """Return ``(y, tape)``. ``rng`` drives dropout and is required when training."""
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise DimensionError(f"expected input of shape (B, {self.spec.input_dim}), got {x.shape}")
        if train and self.spec.dropout_p > 0 and rng is None:
            raise ValueError("training-mode forward with dropout needs an rng")
        p, spec = self.params, self.spec
        tape = []
        h, c = linear_forward(x, p["in.W"], p["in.b"])
        tape.append(("linear", "in", c))
        for i in range(spec.n_blocks):
            skip = h
            for l in range(2):
                name = f"blocks.{i}.{l}"
                h, c = linear_forward(h, p[f"{name}.W"], p[f"{name}.b"])
                tape.append(("linear", name, c))
                if spec.use_batchnorm:
                    h, c = batchnorm_forward(h, p[f"{name}.bn.gamma"], p[f"{name}.bn.beta"],
                                             self.buffers[f"{name}.bn.running_mean"],
                                             self.buffers[f"{name}.bn.running_var"], train)
                    tape.append(("bn", f"{name}.bn", c))
                h, c = relu_forward(h)
                tape.append(("relu", name, c))
                h, c = dropout_forward(h, spec.dropout_p, train, rng)
                tape.append(("dropout", name, c))
            h = h + skip
            tape.append(("residual", f"blocks.{i}", None))
        y, c = linear_forward(h, p["out.W"], p["out.b"])
        tape.append(("linear", "out", c))
        return y, tape

    def __call__(self, x):
        return self.forward(x, train=False)[0]

    def backward(self, tape, gy, need_params: bool = True):
        """Return ``(grads, gx)``; ``grads`` is empty when ``need_params`` is False."""
        gy = np.asarray(gy, dtype=self.dtype)
        grads: dict[str, np.ndarray] = {}
        skips: list[np.ndarray] = []
        g = gy
        for kind, name, cache in reversed(tape):
            if kind == "linear":
                if cache[0].shape[0] != g.shape[0] or cache[1].shape[1] != g.shape[1]:
                    raise DimensionError("gradient shape does not match the tape")
                g, gw, gb = linear_backward(cache, g, need_params)
                if need_params:
                    grads[f"{name}.W"], grads[f"{name}.b"] = gw, gb
                if name.endswith(".0") and skips:
                    # first linear of a block: merge the skip-path gradient
                    g = g + skips.pop()
            elif kind == "bn":
                g, gg, gb = batchnorm_backward(cache, g, need_params)
                if need_params:
                    grads[f"{name}.gamma"], grads[f"{name}.beta"] = gg, gb
            elif kind == "relu":
                g = relu_backward(cache, g)
            elif kind == "dropout":
                g = dropout_backward(cache, g)
            elif kind == "residual":
                skips.append(g)
        return grads, g

    # -- serialization helpers
    def state(self) -> dict[str, np.ndarray]:
        return {**self.params, **self.buffers}

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        for store in (self.params, self.buffers):
            for name, arr in store.items():
                if name not in tensors:
                    raise CheckpointCorruptError(f"checkpoint is missing tensor {name!r}")
                if tensors[name].shape != arr.shape:
                    raise CheckpointCorruptError(
                        f"tensor {name!r} has shape {tensors[name].shape}, expected {arr.shape}")
                store[name] = np.array(tensors[name], dtype=self.dtype)

    def digest(self) -> str:
        """SHA-256 over every parameter and buffer, in name order."""
        h = hashlib.sha256()
        for name, arr in sorted(self.state().items()):
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


class Adam:
    """Bias-corrected Adam; moments are created lazily per parameter name."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1 - b1 ** self.t
        c2 = 1 - b2 ** self.t
        for name, g in grads.items():
            p = params[name]
            if g.shape != p.shape:
                raise DimensionError(f"gradient for {name!r} has shape {g.shape}, expected {p.shape}")
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# --- checkpoints --------------------------------------------------------------
#
# <prefix>.manifest : JSON {format, version, meta, tensors: [{name, shape}]}
# <prefix>.weights  : little-endian float32 data of every tensor, in manifest order

CKPT_FORMAT = "vipelab-checkpoint"


def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".manifest", ".weights"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".manifest"), p.with_name(p.name + ".weights")


def save_checkpoint(tensors: dict[str, np.ndarray], meta: dict, path) -> Path:
    manifest_path, weights_path = _paths(path)
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    entries, blobs = [], []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        entries.append({"name": name, "shape": list(arr.shape)})
        blobs.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    doc = {"format": CKPT_FORMAT, "version": 1, "meta": meta, "tensors": entries}
    weights_path.write_bytes(b"".join(blobs))
    manifest_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    manifest_path, weights_path = _paths(path)
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
        blob = weights_path.read_bytes()
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptError(f"cannot read checkpoint {manifest_path}: {exc}") from exc
    if doc.get("format") != CKPT_FORMAT:
        raise CheckpointCorruptError(f"{manifest_path} is not a {CKPT_FORMAT} manifest")
    sizes = [int(np.prod(e["shape"], dtype=np.int64)) for e in doc["tensors"]]
    if sum(sizes) * 4 != len(blob):
        raise CheckpointCorruptError(
            f"{weights_path}: expected {sum(sizes) * 4} bytes, found {len(blob)}")
    flat = np.frombuffer(blob, dtype="<f4")
    tensors, offset = {}, 0
    for entry, size in zip(doc["tensors"], sizes):
        tensors[entry["name"]] = flat[offset:offset + size].reshape(entry["shape"]).astype(np.float32)
        offset += size
    return tensors, doc["meta"]


def prefixed(prefix: str, tensors: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {f"{prefix}/{k}": v for k, v in tensors.items()}


def unprefixed(prefix: str, tensors: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    head = prefix + "/"
    return {k[len(head):]: v for k, v in tensors.items() if k.startswith(head)}


def mlp_from_state(spec: MlpSpec, tensors: dict[str, np.ndarray], dtype=np.float32) -> Mlp:
    net = Mlp(spec, np.random.default_rng(0), dtype=dtype)
    net.load_state(tensors)
    return net
