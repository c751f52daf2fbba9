"""Independent reference implementations shared by unit and acceptance tests."""

import math

import numpy as np


def rel_err(a, b, floor: float = 1e-5) -> float:
    """||a - b|| / (||a|| + ||b||); the floor keeps exactly-zero gradients (e.g. a bias
    feeding train-mode batchnorm) from turning finite-difference noise into a failure."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), floor))


def central_diff(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Numerical gradient of scalar ``f()`` w.r.t. array ``x`` (perturbed in place)."""
    g = np.zeros_like(x, dtype=float)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def loop_mpjpe(a, b) -> float:
    total = 0.0
    for j in range(len(a)):
        total += math.sqrt(sum((float(a[j][c]) - float(b[j][c])) ** 2 for c in range(len(a[j]))))
    return total / len(a)


def mine_triplets_oracle(poses, min_sep=0.1):
    """Per anchor: sort the others by (distance, index); j is the first, k the first later with a gap >= min_sep."""
    n = len(poses)
    out = []
    for i in range(n):
        d = [(loop_mpjpe(poses[i], poses[o]), o) for o in range(n) if o != i]
        d.sort()
        dj, j = d[0]
        for dk, k in d[1:]:
            if dk - dj >= min_sep:
                out.append((i, j, k))
                break
    return out


def knn_oracle(embeddings, pose_ids, query, k):
    """Repeated selection of the minimum (distance, pose_id) among remaining entries."""
    remaining = list(range(len(embeddings)))
    dists = [math.sqrt(sum((float(e) - float(q)) ** 2 for e, q in zip(row, query))) for row in embeddings]
    picked = []
    for _ in range(min(k, len(remaining))):
        best = min(remaining, key=lambda r: (dists[r], pose_ids[r]))
        picked.append(best)
        remaining.remove(best)
    return picked


def pa_loop(a, b):
    a0 = np.asarray(a, float) - a[0]
    b0 = np.asarray(b, float) - b[0]
    u, _, vt = np.linalg.svd(b0.T @ a0)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return loop_mpjpe(a0, b0 @ r.T)


def dedup_oracle(poses, min_dist):
    kept = []
    for i, p in enumerate(poses):
        if all(pa_loop(poses[k], p) >= min_dist for k in kept):
            kept.append(i)
    return kept


def kl_monte_carlo(mu, logvar, n_samples, rng) -> float:
    """E_q[log q(e) - log p(e)] for a diagonal Gaussian q and standard normal p."""
    sigma = np.exp(0.5 * logvar)
    e = mu + sigma * rng.standard_normal((n_samples, len(mu)))
    log_q = -0.5 * (((e - mu) / sigma) ** 2 + logvar + math.log(2 * math.pi)).sum(1)
    log_p = -0.5 * (e ** 2 + math.log(2 * math.pi)).sum(1)
    return float(np.mean(log_q - log_p))
