"""Generation in embedding space: noise perturbation, waypoint interpolation, 2-D export."""

from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from .errors import DegenerateProjectionWarning, DimensionError
from .nn import Mlp

DEFAULT_ALPHAS = (0.2, 0.3, 0.4, 0.5)


def _decode(decoder: Mlp, e: np.ndarray) -> np.ndarray:
    e = np.atleast_2d(e)
    return decoder(e).reshape(len(e), -1, 3).astype(float)


def _check_dim(decoder: Mlp, *vecs) -> None:
    for v in vecs:
        if np.shape(v) != (decoder.spec.input_dim,):
            raise DimensionError(f"expected a {decoder.spec.input_dim}-vector, got shape {np.shape(v)}")


def unit_direction(z) -> np.ndarray:
    """``z / ||z||``; the zero vector is returned unchanged."""
    z = np.asarray(z, dtype=float)
    norm = np.linalg.norm(z)
    return z if norm == 0 else z / norm


def random_direction(rng: np.random.Generator, dim: int) -> np.ndarray:
    return unit_direction(rng.standard_normal(dim))


def perturb(decoder: Mlp, e, z, alphas=DEFAULT_ALPHAS) -> list[np.ndarray]:
    """Decode ``e + alpha * z_hat`` for each alpha, in the given order."""
    e = np.asarray(e, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_dim(decoder, e, z)
    z = unit_direction(z)
    codes = np.stack([e + a * z for a in alphas]) if len(alphas) else np.zeros((0, len(e)))
    return list(_decode(decoder, codes)) if len(codes) else []


def interpolation_codes(e_a, e_b, steps: int) -> np.ndarray:
    if steps < 2:
        raise ValueError("interpolation needs at least 2 steps")
    e_a = np.asarray(e_a, dtype=float)
    e_b = np.asarray(e_b, dtype=float)
    t = np.arange(steps)[:, None] / (steps - 1)
    codes = e_a + t * (e_b - e_a)
    codes[-1] = e_b
    return codes


def interpolate(decoder: Mlp, e_a, e_b, steps: int = 5) -> list[np.ndarray]:
    """Decode evenly spaced points on the segment from ``e_a`` to ``e_b`` (endpoints included)."""
    _check_dim(decoder, np.asarray(e_a), np.asarray(e_b))
    return list(_decode(decoder, interpolation_codes(e_a, e_b, steps)))


def pca_2d(embeddings) -> tuple[np.ndarray, np.ndarray, bool]:
    """Project onto the top two principal components.

    Returns ``(coords, components, degenerate)``; degenerate inputs (zero
    total variance) give all-zero coordinates.
    """
    x = np.asarray(embeddings, dtype=float)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("PCA export needs at least 2 embeddings")
    centered = x - x.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] <= 1e-12 * max(1.0, np.abs(x).max()):
        return np.zeros((len(x), 2)), np.zeros((2, x.shape[1])), True
    comps = np.zeros((2, x.shape[1]))
    m = min(2, vt.shape[0])
    comps[:m] = vt[:m]
    return centered @ comps.T, comps, False


def embedding_viz_export(embeddings, labels, path) -> np.ndarray:
    """Write ``x,y,label`` CSV rows of the 2-D PCA projection; returns the coordinates."""
    coords, _, degenerate = pca_2d(embeddings)
    if degenerate:
        warnings.warn("embedding covariance is degenerate; writing zeros", DegenerateProjectionWarning,
                      stacklevel=2)
    labels = list(labels)
    if len(labels) != len(coords):
        raise DimensionError("one label per embedding is required")
    lines = ["x,y,label"] + [f"{x:.17g},{y:.17g},{lab}" for (x, y), lab in zip(coords, labels)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return coords
