"""Cross-view retrieval: exact k-NN over embeddings and the Hit@k metric."""

from __future__ import annotations

import itertools
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, TruncatedQueryWarning
from .pose import mpjpe, pa_mpjpe


@dataclass(frozen=True)
class HitConfig:
    ks: tuple[int, ...] = (1, 10, 20)
    threshold: float = 0.1
    exclude_self: bool = False

    def __post_init__(self):
        if not self.threshold >= 0:
            raise ConfigError("hit threshold must be >= 0")
        if not self.ks or min(self.ks) < 1:
            raise ConfigError("every k must be >= 1")


class EmbeddingIndex:
    """Embeddings tagged with (pose_id, camera_id) and the canonical 3D pose they came from."""

    def __init__(self, pose_ids, camera_ids, embeddings, poses3d):
        self.pose_ids = np.asarray(pose_ids, dtype=np.int64)
        self.camera_ids = np.asarray(camera_ids, dtype=np.int64)
        self.embeddings = np.asarray(embeddings, dtype=float)
        self.poses3d = np.asarray(poses3d, dtype=float)
        n = len(self.pose_ids)
        if self.embeddings.ndim != 2:
            raise DimensionError("embeddings must be a (M, n) array")
        if not (len(self.camera_ids) == len(self.embeddings) == len(self.poses3d) == n):
            raise DimensionError("index fields must have equal length")
        keys = set(zip(self.pose_ids.tolist(), self.camera_ids.tolist()))
        if len(keys) != n:
            raise ValueError("(pose_id, camera_id) pairs must be unique")

    def __len__(self) -> int:
        return len(self.pose_ids)


def knn_query(index: EmbeddingIndex, query, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest entries by Euclidean distance; ties go to the lower pose id.

    Returns ``(entry_indices, distances)``. Asking for more entries than the
    index holds returns all of them with a ``TruncatedQueryWarning``.
    """
    if len(index) == 0:
        raise ValueError("cannot query an empty index")
    query = np.asarray(query, dtype=float)
    if query.shape != (index.embeddings.shape[1],):
        raise DimensionError(f"query has shape {query.shape}, index dim is {index.embeddings.shape[1]}")
    if k > len(index):
        warnings.warn(f"k={k} exceeds index size {len(index)}", TruncatedQueryWarning, stacklevel=2)
        k = len(index)
    dist = np.sqrt(((index.embeddings - query) ** 2).sum(axis=1))
    order = np.lexsort((index.pose_ids, dist))[:k]
    return order, dist[order]


def _topk_all(queries: np.ndarray, gallery: EmbeddingIndex, k: int, exclude=None) -> np.ndarray:
    """Top-k gallery rows for each query row (same ordering rule as ``knn_query``)."""
    out = np.empty((len(queries), k), dtype=np.int64)
    chunk = 256
    for start in range(0, len(queries), chunk):
        q = queries[start:start + chunk]
        d = np.sqrt(((q[:, None, :] - gallery.embeddings[None]) ** 2).sum(axis=-1))
        if exclude is not None:
            d[exclude[start:start + chunk]] = np.inf
        for r in range(len(q)):
            out[start + r] = np.lexsort((gallery.pose_ids, d[r]))[:k]
    return out


def hit_at_k(index_q: EmbeddingIndex, index_g: EmbeddingIndex, cfg: HitConfig | None = None,
             root_idx: int = 0) -> dict[int, float]:
    """Fraction of queries with a top-k gallery neighbour whose aligned 3D MPJPE is below threshold."""
    cfg = cfg or HitConfig()
    if len(index_q) == 0 or len(index_g) == 0:
        raise ValueError("hit_at_k needs non-empty query and gallery indexes")
    kmax = min(max(cfg.ks), len(index_g) - (1 if cfg.exclude_self else 0))
    exclude = None
    if cfg.exclude_self:
        exclude = (index_q.pose_ids[:, None] == index_g.pose_ids[None]) \
            & (index_q.camera_ids[:, None] == index_g.camera_ids[None])
    top = _topk_all(index_q.embeddings, index_g, kmax, exclude)
    q_poses = np.repeat(index_q.poses3d[:, None], kmax, axis=1)
    err = pa_mpjpe(q_poses, index_g.poses3d[top], root_idx=root_idx)
    good = np.asarray(err) < cfg.threshold
    first_hit = np.where(good.any(axis=1), good.argmax(axis=1), np.iinfo(np.int64).max)
    return {k: float(np.mean(first_hit < k)) for k in cfg.ks}


def hit_at_k_rig(indexes: dict[int, EmbeddingIndex], cfg: HitConfig | None = None,
                 pairs=None, workers: int = 1, root_idx: int = 0) -> dict:
    """Hit@k for ordered camera pairs plus their average.

    ``pairs`` defaults to every ordered pair of distinct cameras.
    """
    cfg = cfg or HitConfig()
    if pairs is None:
        pairs = [(a, b) for a, b in itertools.permutations(sorted(indexes), 2)]
    pairs = list(pairs)
    if not pairs:
        raise ValueError("no camera pairs to evaluate")

    def run(pair):
        return hit_at_k(indexes[pair[0]], indexes[pair[1]], cfg, root_idx)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, pairs))
    else:
        results = [run(p) for p in pairs]
    per_pair = [{"query_camera": a, "gallery_camera": b, **{f"hit@{k}": r[k] for k in cfg.ks}}
                for (a, b), r in zip(pairs, results)]
    average = {f"hit@{k}": float(np.mean([r[k] for r in results])) for k in cfg.ks}
    return {"pairs": per_pair, "average": average}


def baseline_2d_retrieval(q_ids, q_poses2d, q_poses3d, g_ids, g_poses2d, g_poses3d,
                          cfg: HitConfig | None = None, q_cam: int = 0, g_cam: int = 1,
                          root_idx: int = 0) -> dict[int, float]:
    """Hit@k with normalized 2D keypoints (flattened) standing in for embeddings."""
    q2 = np.asarray(q_poses2d, dtype=float)
    g2 = np.asarray(g_poses2d, dtype=float)
    iq = EmbeddingIndex(q_ids, np.full(len(q2), q_cam), q2.reshape(len(q2), -1), q_poses3d)
    ig = EmbeddingIndex(g_ids, np.full(len(g2), g_cam), g2.reshape(len(g2), -1), g_poses3d)
    return hit_at_k(iq, ig, cfg, root_idx)


def mpjpe_eval(pred, gt, aligned: bool = False, root_idx: int = 0) -> float:
    """Mean MPJPE over paired pose sets, optionally after per-pair rigid alignment."""
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise DimensionError(f"pose set shapes differ: {pred.shape} vs {gt.shape}")
    if len(pred) == 0:
        raise ValueError("empty pose sets")
    err = pa_mpjpe(gt, pred, root_idx=root_idx) if aligned else mpjpe(gt, pred)
    return float(np.mean(err))
