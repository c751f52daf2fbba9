"""Synthetic multi-camera pose data from forward kinematics.

A dataset directory holds ``manifest.json`` and ``records.jsonl``. Each line of
the records file is one (pose, camera) observation::

    {"id": 7, "split": "train", "camera_id": 2, "joints3d": [[x, y, z], ...], "joints2d": [[u, v], ...]}

``joints3d`` is the world-frame pose (shared by every camera of that id) and
``joints2d`` its projection through ``rig[camera_id]``. Floats are written
with 17 significant digits so 64-bit values survive the round trip.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import Camera, project, rot_x, rot_y, rot_z
from .errors import ConfigError, DatasetError
from .skeleton import Skeleton, default_skeleton

FORMAT_NAME = "vipelab-dataset"
FORMAT_VERSION = 1
SPLITS = ("train", "val", "test")

# Euler ranges (x, y, z) in radians for the rotation of the bone ending at each
# joint, relative to its parent's frame. The root entry is the global orientation.
DEFAULT_ANGLE_RANGES: dict[str, list[list[float]]] = {
    "pelvis": [[-0.15, 0.15], [-0.15, 0.15], [-math.pi, math.pi]],
    "r_hip": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
    "l_hip": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
    "r_knee": [[-0.1, 0.6], [-0.6, 1.6], [-0.3, 0.3]],
    "l_knee": [[-0.6, 0.1], [-0.6, 1.6], [-0.3, 0.3]],
    "r_ankle": [[0.0, 0.0], [-2.0, 0.0], [0.0, 0.0]],
    "l_ankle": [[0.0, 0.0], [-2.0, 0.0], [0.0, 0.0]],
    "spine": [[-0.3, 0.3], [-0.2, 0.6], [-0.4, 0.4]],
    "thorax": [[-0.2, 0.2], [-0.2, 0.3], [-0.3, 0.3]],
    "neck": [[-0.3, 0.3], [-0.3, 0.4], [-0.3, 0.3]],
    "head": [[-0.3, 0.3], [-0.3, 0.3], [-0.5, 0.5]],
    "l_shoulder": [[-0.15, 0.15], [-0.1, 0.1], [-0.15, 0.15]],
    "r_shoulder": [[-0.15, 0.15], [-0.1, 0.1], [-0.15, 0.15]],
    "l_elbow": [[-2.6, 0.2], [-1.0, 2.6], [-0.5, 0.5]],
    "r_elbow": [[-0.2, 2.6], [-1.0, 2.6], [-0.5, 0.5]],
    "l_wrist": [[0.0, 0.0], [0.0, 2.4], [-0.8, 0.8]],
    "r_wrist": [[0.0, 0.0], [0.0, 2.4], [-0.8, 0.8]],
}

ANGLE_LIMIT = math.pi


def default_rig() -> list[Camera]:
    """Four chest-level cameras plus two elevated ones held out from training."""
    deg = math.pi / 180
    return [
        Camera(azimuth=0 * deg, elevation=0.0, name="chest0"),
        Camera(azimuth=90 * deg, elevation=0.0, name="chest1"),
        Camera(azimuth=180 * deg, elevation=0.0, name="chest2"),
        Camera(azimuth=270 * deg, elevation=0.0, name="chest3"),
        Camera(azimuth=45 * deg, elevation=35 * deg, name="elev0"),
        Camera(azimuth=225 * deg, elevation=25 * deg, name="elev1"),
    ]


@dataclass
class GeneratorConfig:
    n_poses: int = 1000
    angle_ranges: dict[str, list[list[float]]] = field(
        default_factory=lambda: {k: [list(r) for r in v] for k, v in DEFAULT_ANGLE_RANGES.items()})
    rig: list[Camera] = field(default_factory=default_rig)
    seed: int = 0
    splits: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if self.n_poses < 0:
            raise ConfigError("n_poses must be >= 0")
        if len(self.splits) != 3 or any(f < 0 for f in self.splits) \
                or abs(sum(self.splits) - 1.0) > 1e-9:
            raise ConfigError("split fractions must be three non-negative values summing to 1")
        for joint, ranges in self.angle_ranges.items():
            if len(ranges) != 3:
                raise ConfigError(f"joint {joint!r} needs three (min, max) angle ranges")
            for lo, hi in ranges:
                if lo > hi or abs(lo) > ANGLE_LIMIT or abs(hi) > ANGLE_LIMIT:
                    raise ConfigError(f"invalid angle range [{lo}, {hi}] for joint {joint!r}")

    @classmethod
    def zero_ranges(cls, skel: Skeleton, **kw) -> "GeneratorConfig":
        return cls(angle_ranges={n: [[0.0, 0.0]] * 3 for n in skel.joint_names}, **kw)

    def to_dict(self) -> dict:
        return {
            "n_poses": self.n_poses,
            "angle_ranges": self.angle_ranges,
            "rig": [c.to_dict() for c in self.rig],
            "seed": self.seed,
            "splits": list(self.splits),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        d = dict(d)
        unknown = set(d) - {"n_poses", "angle_ranges", "rig", "seed", "splits"}
        if unknown:
            raise ConfigError(f"unknown synth keys: {sorted(unknown)}")
        if "rig" in d:
            d["rig"] = [Camera.from_dict(c) for c in d["rig"]]
        if "splits" in d:
            d["splits"] = tuple(d["splits"])
        if "angle_ranges" in d:
            merged = {k: [list(r) for r in v] for k, v in DEFAULT_ANGLE_RANGES.items()}
            merged.update(d["angle_ranges"])
            d["angle_ranges"] = merged
        return cls(**d)


def _euler(ranges, rng: np.random.Generator) -> np.ndarray:
    x, y, z = (rng.uniform(lo, hi) if hi > lo else lo for lo, hi in ranges)
    return rot_z(z) @ rot_y(y) @ rot_x(x)


def sample_pose(rng: np.random.Generator, skel: Skeleton, cfg: GeneratorConfig) -> np.ndarray:
    """One world-frame pose, root at the origin, exact skeleton bone lengths."""
    zero = [[0.0, 0.0]] * 3
    order = skel.order()
    glob = [None] * skel.n_joints
    pose = np.zeros((skel.n_joints, 3))
    for j in order:
        local = _euler(cfg.angle_ranges.get(skel.joint_names[j], zero), rng)
        if j == skel.root_idx:
            glob[j] = local
            continue
        p = skel.parent[j]
        glob[j] = glob[p] @ local
        d = np.asarray(skel.rest_directions[j], dtype=float)
        pose[j] = pose[p] + glob[j] @ (d / np.linalg.norm(d)) * skel.bone_lengths[j]
    return pose


def assign_splits(n: int, fractions, rng: np.random.Generator) -> list[str]:
    perm = rng.permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    out = [""] * n
    for rank, pid in enumerate(perm):
        out[pid] = "train" if rank < n_train else "val" if rank < n_train + n_val else "test"
    return out


@dataclass
class DatasetManifest:
    n_poses: int
    n_records: int
    n_cameras: int
    split_counts: dict[str, int]
    path: Path | None = None


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_rows(a: np.ndarray) -> str:
    return "[" + ",".join("[" + ",".join(_fmt(v) for v in row) + "]" for row in a) + "]"


def format_record(pid: int, split: str, cam: int, j3: np.ndarray, j2: np.ndarray) -> str:
    return (f'{{"id": {pid}, "split": "{split}", "camera_id": {cam}, '
            f'"joints3d": {_fmt_rows(j3)}, "joints2d": {_fmt_rows(j2)}}}')


def format_pose_record(fields: dict) -> str:
    """One JSON line; array values use the same 17-digit encoding as dataset records."""
    parts = []
    for key, val in fields.items():
        if isinstance(val, np.ndarray):
            text = _fmt_rows(val) if val.ndim == 2 else "[" + ",".join(_fmt(v) for v in val) + "]"
        elif isinstance(val, float):
            text = _fmt(val)
        else:
            text = json.dumps(val)
        parts.append(f"{json.dumps(key)}: {text}")
    return "{" + ", ".join(parts) + "}"


def read_pose_records(path) -> list[dict]:
    """Records from a JSON-lines file (or a single JSON object / list of objects)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
        recs = doc if isinstance(doc, list) else [doc]
    except json.JSONDecodeError:
        try:
            recs = [json.loads(line) for line in text.splitlines() if line.strip()]
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}: malformed record: {exc}") from exc
    if not recs or not all(isinstance(r, dict) for r in recs):
        raise DatasetError(f"{path}: expected one or more JSON object records")
    return recs


def write_pose_records(records, path) -> None:
    try:
        Path(path).write_text("".join(format_pose_record(r) + "\n" for r in records), encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot write {path}: {exc}") from exc


def generate_dataset(cfg: GeneratorConfig, skel: Skeleton | None, out_dir) -> DatasetManifest:
    skel = skel or default_skeleton()
    out_dir = Path(out_dir)
    rng = np.random.default_rng(cfg.seed)
    poses = [sample_pose(rng, skel, cfg) for _ in range(cfg.n_poses)]
    splits = assign_splits(cfg.n_poses, cfg.splits, rng)
    lines = []
    for pid, pose in enumerate(poses):
        for cid, cam in enumerate(cfg.rig):
            j2 = project(pose, cam, skel.root_idx)
            lines.append(format_record(pid, splits[pid], cid, pose, j2))
    counts = {s: splits.count(s) for s in SPLITS}
    manifest = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "n_poses": cfg.n_poses,
        "n_records": len(lines),
        "split_counts": counts,
        "cameras": [c.to_dict() for c in cfg.rig],
        "skeleton": skel.to_dict(),
        "generator": cfg.to_dict(),
    }
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "records.jsonl").write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                               encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot write dataset to {out_dir}: {exc}") from exc
    return DatasetManifest(cfg.n_poses, len(lines), len(cfg.rig), counts, out_dir)


@dataclass
class Dataset:
    """Records of a dataset directory as parallel arrays, in file order."""
    ids: np.ndarray
    splits: np.ndarray
    camera_ids: np.ndarray
    joints3d: np.ndarray
    joints2d: np.ndarray
    cameras: list[Camera]
    skeleton: Skeleton
    manifest: dict

    def select(self, split: str | None = None, cameras=None) -> np.ndarray:
        mask = np.ones(len(self.ids), bool)
        if split is not None:
            mask &= self.splits == split
        if cameras is not None:
            mask &= np.isin(self.camera_ids, list(cameras))
        return np.flatnonzero(mask)

    def poses(self, split: str | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Unique ``(pose_ids, world_poses)`` for a split, sorted by id."""
        idx = self.select(split)
        ids, first = np.unique(self.ids[idx], return_index=True)
        return ids, self.joints3d[idx[first]]


def read_dataset(path) -> Dataset:
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
        lines = (path / "records.jsonl").read_text(encoding="utf-8").splitlines()
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetError(f"cannot read dataset at {path}: {exc}") from exc
    if manifest.get("format") != FORMAT_NAME:
        raise DatasetError(f"{path}: not a {FORMAT_NAME} directory")
    skel = Skeleton.from_dict(manifest["skeleton"])
    n = skel.n_joints
    recs = [json.loads(line) for line in lines if line.strip()]
    if len(recs) != manifest["n_records"]:
        raise DatasetError(f"{path}: manifest lists {manifest['n_records']} records, found {len(recs)}")
    return Dataset(
        ids=np.array([r["id"] for r in recs], dtype=np.int64),
        splits=np.array([r["split"] for r in recs], dtype=object),
        camera_ids=np.array([r["camera_id"] for r in recs], dtype=np.int64),
        joints3d=np.array([r["joints3d"] for r in recs], dtype=float).reshape(len(recs), n, 3),
        joints2d=np.array([r["joints2d"] for r in recs], dtype=float).reshape(len(recs), n, 2),
        cameras=[Camera.from_dict(c) for c in manifest["cameras"]],
        skeleton=skel,
        manifest=manifest,
    )
