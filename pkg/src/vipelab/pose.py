"""Pose normalization, canonical rotation, rigid alignment and MPJPE.

Poses are plain arrays of shape ``(N, 3)``; most functions also accept a
leading batch axis ``(B, N, 3)``. A rotation is a ``(3, 3)`` array applied to
row-vector joints as ``pose @ R.T``.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    AlignmentDegenerateError,
    DegenerateBoneError,
    DegeneratePoseError,
    DimensionError,
)
from .skeleton import Skeleton

# Targets for (left hip, right hip, spine): hips on the y axis, spine on z.
CANONICAL_TARGETS = np.array([[0.0, -1.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])

_RANK_TOL = 1e-9


def _check_pair(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionError(f"pose shapes differ: {a.shape} vs {b.shape}")


def mpjpe(a, b) -> float | np.ndarray:
    """Mean Euclidean distance between corresponding joints.

    Broadcasts over leading axes; returns a float for single poses.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_pair(a, b)
    err = np.linalg.norm(a - b, axis=-1).mean(axis=-1)
    return float(err) if err.ndim == 0 else err


def root_center(p, skel: Skeleton | None = None, root_idx: int = 0) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if skel is not None:
        root_idx = skel.root_idx
    return p - p[..., root_idx:root_idx + 1, :]


def rms_radius(p) -> np.ndarray | float:
    p = np.asarray(p, dtype=float)
    r = np.sqrt((p ** 2).sum(axis=-1).mean(axis=-1))
    return float(r) if r.ndim == 0 else r


def normalize_scale(p) -> np.ndarray:
    """Divide a root-centered pose by its RMS joint radius."""
    p = np.asarray(p, dtype=float)
    r = np.asarray(rms_radius(p))
    if np.any(~(r > 0)):
        raise DegeneratePoseError("cannot normalize a pose whose joints all sit at the origin")
    return p / r[..., None, None]


def kabsch(src, dst) -> np.ndarray:
    """Proper rotation R minimizing sum ||R src_i - dst_i||^2 (no centering).

    ``src`` and ``dst`` are ``(..., K, 3)``. Raises if the cross-covariance has
    rank < 2, where the optimum is not unique.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    h = np.swapaxes(src, -1, -2) @ dst
    u, s, vt = np.linalg.svd(h)
    if np.any(s[..., 1] <= _RANK_TOL * np.maximum(s[..., 0], 1e-300)):
        raise AlignmentDegenerateError("point set is degenerate (cross-covariance rank < 2)")
    v = np.swapaxes(vt, -1, -2)
    ut = np.swapaxes(u, -1, -2)
    d = np.sign(np.linalg.det(v @ ut))
    d = np.where(d == 0, 1.0, d)
    v = v.copy()
    v[..., :, 2] *= d[..., None]
    return v @ ut


def align_rotation(p, skel: Skeleton) -> tuple[np.ndarray, np.ndarray]:
    """Rotate a root-centered pose so its hips lie on the y axis and its spine on z.

    Returns ``(rotated_pose, R)`` where ``R`` is the rotation applied to the
    pose (``rotated = p @ R.T``).
    """
    p = np.asarray(p, dtype=float)
    triad = p[..., [skel.left_hip_idx, skel.right_hip_idx, skel.spine_idx], :]
    targets = np.broadcast_to(CANONICAL_TARGETS, triad.shape)
    rot = kabsch(triad, targets)
    return p @ np.swapaxes(rot, -1, -2), rot


def canonicalize(p, skel: Skeleton, rotate: bool = True, retarget: bool = False) -> np.ndarray:
    """Root-center, scale to unit RMS radius and (optionally) rotate to the canonical frame.

    ``retarget`` first rescales every bone to the skeleton's canonical lengths.
    ``rotate=False`` skips the realignment, which is the ablation setting.
    """
    p = np.asarray(p, dtype=float)
    if retarget:
        p = enforce_bone_lengths(p, skel)
    out = normalize_scale(root_center(p, skel))
    if rotate:
        out, _ = align_rotation(out, skel)
    return out


def enforce_bone_lengths(p, skel: Skeleton) -> np.ndarray:
    """Rescale each bone to the skeleton length, keeping bone directions."""
    p = np.asarray(p, dtype=float)
    out = np.empty_like(p)
    out[..., skel.root_idx, :] = p[..., skel.root_idx, :]
    for parent, j in skel.bones():
        v = p[..., j, :] - p[..., parent, :]
        norm = np.linalg.norm(v, axis=-1, keepdims=True)
        if np.any(norm == 0):
            raise DegenerateBoneError(f"zero-length bone {skel.joint_names[parent]}->{skel.joint_names[j]}")
        out[..., j, :] = out[..., parent, :] + v / norm * skel.bone_lengths[j]
    return out


def procrustes_align(a, b, root_idx: int = 0, scale: bool = False) -> np.ndarray:
    """Rigidly superimpose ``b`` onto ``a`` about their root joints.

    Both poses are root-centered, ``b`` is rotated (Kabsch over all joints)
    and optionally scaled, then translated onto ``a``'s root. Broadcasts over
    leading axes.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_pair(a, b)
    a0 = root_center(a, root_idx=root_idx)
    b0 = root_center(b, root_idx=root_idx)
    if np.any(rms_radius(b0) == 0) or np.any(rms_radius(a0) == 0):
        raise DegeneratePoseError("procrustes alignment of a pose with all joints coincident")
    rot = kabsch(b0, a0)
    aligned = b0 @ np.swapaxes(rot, -1, -2)
    if scale:
        s = (aligned * a0).sum(axis=(-1, -2)) / (b0 ** 2).sum(axis=(-1, -2))
        aligned = aligned * np.asarray(s)[..., None, None]
    return aligned + a[..., root_idx:root_idx + 1, :]


def pa_mpjpe(a, b, root_idx: int = 0, scale: bool = False):
    """MPJPE after aligning ``b`` onto ``a``."""
    return mpjpe(a, procrustes_align(a, b, root_idx=root_idx, scale=scale))


def dedup_poses(poses, min_dist: float, root_idx: int = 0) -> list[int]:
    """Greedy filter: keep a pose iff its aligned MPJPE to every kept pose is >= min_dist."""
    if min_dist < 0:
        raise ValueError("min_dist must be >= 0")
    poses = np.asarray(poses, dtype=float)
    kept: list[int] = []
    for i in range(len(poses)):
        if kept:
            d = pa_mpjpe(poses[kept], np.broadcast_to(poses[i], poses[kept].shape), root_idx=root_idx)
            if np.any(np.atleast_1d(d) < min_dist):
                continue
        kept.append(i)
    return kept


def is_rotation(m, tol: float = 1e-9) -> bool:
    m = np.asarray(m, dtype=float)
    return (m.shape == (3, 3)
            and np.abs(m.T @ m - np.eye(3)).max() < tol
            and abs(np.linalg.det(m) - 1.0) < tol)


def random_rotation_matrix(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed proper rotation (Haar measure)."""
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
