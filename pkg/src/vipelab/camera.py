"""Pinhole cameras on a sphere around the subject, projection and view augmentation.

World frame is z-up. A camera sits at ``look_at + radius * (cos el cos az,
cos el sin az, sin el)`` and looks at ``look_at``. Camera coordinates are
x right, y down, z forward.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DegeneratePoseError, ProjectionError

PROJECTION_EPS = 1e-6
_UP = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Camera:
    azimuth: float = 0.0
    elevation: float = 0.0
    radius: float = 5.0
    focal: float = 1.0
    look_at: tuple[float, float, float] | None = None
    name: str = ""

    def __post_init__(self):
        if not self.focal > 0:
            raise ConfigError("focal must be > 0")
        if not self.radius > 0:
            raise ConfigError("radius must be > 0")
        if not -math.pi / 2 < self.elevation < math.pi / 2:
            raise ConfigError("elevation must lie in (-pi/2, pi/2)")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["look_at"] is not None:
            d["look_at"] = list(d["look_at"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        d = dict(d)
        if d.get("look_at") is not None:
            d["look_at"] = tuple(float(v) for v in d["look_at"])
        unknown = set(d) - {"azimuth", "elevation", "radius", "focal", "look_at", "name"}
        if unknown:
            raise ConfigError(f"unknown camera keys: {sorted(unknown)}")
        return cls(**d)


def camera_frame(cam: Camera, target) -> tuple[np.ndarray, np.ndarray]:
    """World-to-camera rotation (rows right, down, forward) and the camera centre."""
    target = np.asarray(target, dtype=float)
    ce, se = math.cos(cam.elevation), math.sin(cam.elevation)
    offset = np.array([ce * math.cos(cam.azimuth), ce * math.sin(cam.azimuth), se])
    center = target + cam.radius * offset
    forward = -offset
    right = np.cross(forward, _UP)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    return np.stack([right, down, forward]), center


def _target(p: np.ndarray, cam: Camera, root_idx: int) -> np.ndarray:
    if cam.look_at is not None:
        return np.asarray(cam.look_at, dtype=float)
    return p[..., root_idx, :]


def to_camera(p, cam: Camera, root_idx: int = 0) -> np.ndarray:
    """Express world joints in camera coordinates. Accepts ``(N, 3)`` or ``(B, N, 3)``."""
    p = np.asarray(p, dtype=float)
    rot, offset = camera_frame(cam, np.zeros(3))
    centers = _target(p, cam, root_idx) + offset
    return (p - centers[..., None, :]) @ rot.T


def project(p, cam: Camera, root_idx: int = 0) -> np.ndarray:
    """Perspective projection ``(f x / z, f y / z)`` of every joint."""
    xc = to_camera(p, cam, root_idx)
    z = xc[..., 2:3]
    if np.any(z <= PROJECTION_EPS):
        raise ProjectionError("joint at or behind the camera plane")
    return cam.focal * xc[..., :2] / z


def normalize_2d(p, root_idx: int = 0) -> np.ndarray:
    """Root-center 2D keypoints and divide by their RMS radius."""
    p = np.asarray(p, dtype=float)
    c = p - p[..., root_idx:root_idx + 1, :]
    r = np.sqrt((c ** 2).sum(axis=-1).mean(axis=-1))
    if np.any(~(r > 0)):
        raise DegeneratePoseError("2D keypoints are all coincident")
    return c / np.asarray(r)[..., None, None]


def rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


@dataclass(frozen=True)
class AugmentConfig:
    azimuth_range: tuple[float, float] = (0.0, 2 * math.pi)
    elevation_range: tuple[float, float] = (-math.pi / 6, math.pi / 6)
    camera: Camera = field(default_factory=Camera)

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentConfig":
        d = dict(d)
        if "camera" in d:
            d["camera"] = Camera.from_dict(d["camera"])
        for key in ("azimuth_range", "elevation_range"):
            if key in d:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "azimuth_range": list(self.azimuth_range),
            "elevation_range": list(self.elevation_range),
            "camera": self.camera.to_dict(),
        }


def random_rotation(rng: np.random.Generator, config: AugmentConfig | None = None) -> np.ndarray:
    """Yaw about the vertical axis composed with a tilt about a horizontal axis."""
    config = config or AugmentConfig()
    az = rng.uniform(*config.azimuth_range)
    el = rng.uniform(*config.elevation_range)
    return rot_z(az) @ rot_y(el)


def rotate_about_root(p, rot, root_idx: int = 0) -> np.ndarray:
    """Apply rotation(s) about the root joint; ``rot`` may be ``(3, 3)`` or ``(B, 3, 3)``."""
    p = np.asarray(p, dtype=float)
    root = p[..., root_idx:root_idx + 1, :]
    return (p - root) @ np.swapaxes(rot, -1, -2) + root


def augment_pair(p, rng: np.random.Generator, config: AugmentConfig | None = None,
                 root_idx: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Randomly rotate a 3D pose about its root and project it through the config camera."""
    config = config or AugmentConfig()
    rotated = rotate_about_root(p, random_rotation(rng, config), root_idx)
    return rotated, project(rotated, config.camera, root_idx)


def augment_batch(poses, rng: np.random.Generator, config: AugmentConfig | None = None,
                  root_idx: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """``augment_pair`` over a ``(B, N, 3)`` batch, one independent rotation per pose."""
    config = config or AugmentConfig()
    poses = np.asarray(poses, dtype=float)
    rots = np.stack([random_rotation(rng, config) for _ in range(len(poses))]) if len(poses) \
        else np.zeros((0, 3, 3))
    rotated = rotate_about_root(poses, rots, root_idx)
    return rotated, project(rotated, config.camera, root_idx)


def half_augmented_batch(poses3d, poses2d, rng: np.random.Generator,
                         config: AugmentConfig | None = None, root_idx: int = 0):
    """Append one augmented view per pose: B originals in, 2B records out.

    Returns ``(world3d, joints2d, is_augmented)``; the first B rows are the
    originals, the last B their rotated and re-projected copies.
    """
    poses3d = np.asarray(poses3d, dtype=float)
    poses2d = np.asarray(poses2d, dtype=float)
    rotated, projected = augment_batch(poses3d, rng, config, root_idx)
    flags = np.r_[np.zeros(len(poses3d), bool), np.ones(len(poses3d), bool)]
    return np.concatenate([poses3d, rotated]), np.concatenate([poses2d, projected]), flags
