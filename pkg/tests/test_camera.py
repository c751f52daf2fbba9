import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from vipelab.camera import (AugmentConfig, Camera, augment_batch, augment_pair, half_augmented_batch,
                            normalize_2d, project, random_rotation, rot_z, to_camera)
from vipelab.errors import ConfigError, DegeneratePoseError, ProjectionError
from vipelab.pose import canonicalize, is_rotation, mpjpe

seeds = st.integers(0, 2**32 - 1)


def reference_projection(p, cam, target):
    """Homogeneous P = K [R | t] built from explicit spherical-frame formulas."""
    az, el = cam.azimuth, cam.elevation
    right = np.array([-math.sin(az), math.cos(az), 0.0])
    down = np.array([math.sin(el) * math.cos(az), math.sin(el) * math.sin(az), -math.cos(el)])
    offset = np.array([math.cos(el) * math.cos(az), math.cos(el) * math.sin(az), math.sin(el)])
    r = np.stack([right, down, -offset])
    center = target + cam.radius * offset
    k = np.diag([cam.focal, cam.focal, 1.0])
    proj = k @ np.hstack([r, (-r @ center)[:, None]])
    hom = np.hstack([p, np.ones((len(p), 1))]) @ proj.T
    return hom[:, :2] / hom[:, 2:]


def test_look_at_projects_to_origin(poses):
    cam = Camera(azimuth=0.7, elevation=0.3)
    uv = project(poses[0], cam)
    np.testing.assert_allclose(uv[0], 0.0, atol=1e-15)
    cam = Camera(azimuth=0.7, elevation=0.3, look_at=tuple(poses[0][5]))
    np.testing.assert_allclose(project(poses[0], cam)[5], 0.0, atol=1e-12)


def test_focal_linearity(poses):
    a = project(poses[0], Camera(azimuth=1.0, focal=1.0))
    b = project(poses[0], Camera(azimuth=1.0, focal=2.0))
    np.testing.assert_allclose(b, 2 * a, rtol=1e-14)


@given(seeds)
def test_projection_matches_matrix_oracle(seed):
    rng = np.random.default_rng(seed)
    p = rng.normal(scale=0.5, size=(17, 3))
    cam = Camera(azimuth=rng.uniform(0, 2 * math.pi), elevation=rng.uniform(-1.2, 1.2),
                 radius=rng.uniform(4, 8), focal=rng.uniform(0.5, 3))
    np.testing.assert_allclose(project(p, cam), reference_projection(p, cam, p[0]), atol=1e-9)


def test_camera_frame_is_right_handed(poses):
    for az in np.linspace(0, 6, 7):
        xc = to_camera(np.eye(3), Camera(azimuth=az, elevation=0.4), root_idx=0)
        assert np.isfinite(xc).all()
    from vipelab.camera import camera_frame
    rot, _ = camera_frame(Camera(azimuth=0.3, elevation=-0.5), np.zeros(3))
    assert is_rotation(rot)


def test_upright_subject_head_is_up(poses, skel):
    # y points down in the image, so a head above the pelvis has negative v
    uv = project(poses[0], Camera(azimuth=0.0))
    assert uv[skel.index("head"), 1] < 0


@given(seeds)
def test_projection_equivariance(seed):
    # rotating the subject by yaw a equals moving the camera by -a
    rng = np.random.default_rng(seed)
    p = rng.normal(scale=0.5, size=(17, 3))
    a = rng.uniform(0, 2 * math.pi)
    cam = Camera(azimuth=1.1, elevation=0.2)
    moved = Camera(azimuth=1.1 - a, elevation=0.2)
    rotated = (p - p[0]) @ rot_z(a).T + p[0]
    np.testing.assert_allclose(project(rotated, cam), project(p, moved), atol=1e-9)


def test_behind_camera_raises():
    p = np.zeros((2, 3))
    p[1] = [10.0, 0.0, 0.0]  # beyond the camera at azimuth 0, radius 5
    with pytest.raises(ProjectionError):
        project(p, Camera())


def test_camera_validation():
    with pytest.raises(ConfigError):
        Camera(focal=0)
    with pytest.raises(ConfigError):
        Camera(elevation=math.pi / 2)
    with pytest.raises(ConfigError):
        Camera(radius=-1)
    cam = Camera(azimuth=0.2, look_at=(1.0, 2.0, 3.0), name="x")
    assert Camera.from_dict(cam.to_dict()) == cam


def test_normalize_2d(poses):
    uv = project(poses[0], Camera(azimuth=0.5))
    out = normalize_2d(uv)
    assert np.sqrt((out ** 2).sum(-1).mean()) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(normalize_2d(out), out, atol=1e-12)
    np.testing.assert_allclose(normalize_2d(3.0 * uv), out, atol=1e-12)
    with pytest.raises(DegeneratePoseError):
        normalize_2d(np.ones((17, 2)))


def test_zero_range_rotation_is_identity():
    cfg = AugmentConfig(azimuth_range=(0.0, 0.0), elevation_range=(0.0, 0.0))
    np.testing.assert_array_equal(random_rotation(np.random.default_rng(0), cfg), np.eye(3))


def test_random_rotations_are_proper():
    rng = np.random.default_rng(1)
    for _ in range(200):
        assert is_rotation(random_rotation(rng))


def test_azimuth_uniform_chi_square():
    rng = np.random.default_rng(2)
    az = np.array([math.atan2(r[1, 0], r[0, 0]) for r in (random_rotation(rng) for _ in range(100_000))])
    counts, _ = np.histogram(np.mod(az, 2 * math.pi), bins=36, range=(0, 2 * math.pi))
    assert stats.chisquare(counts).pvalue > 0.01


def test_augment_pair_identity(poses):
    cfg = AugmentConfig(azimuth_range=(0.0, 0.0), elevation_range=(0.0, 0.0))
    rotated, uv = augment_pair(poses[0], np.random.default_rng(0), cfg)
    np.testing.assert_allclose(rotated, poses[0], atol=1e-15)
    np.testing.assert_allclose(uv, project(poses[0], cfg.camera), atol=1e-15)


def test_augment_label_consistency(poses, skel):
    rotated, uv = augment_batch(poses[:16], np.random.default_rng(3))
    assert mpjpe(canonicalize(rotated, skel), canonicalize(poses[:16], skel)).max() < 1e-6
    np.testing.assert_allclose(uv, project(rotated, Camera()), atol=1e-12)


def test_half_augmented_batch(poses):
    uv = project(poses[:8], Camera())
    world, joints2d, flags = half_augmented_batch(poses[:8], uv, np.random.default_rng(4))
    assert world.shape == (16, 17, 3) and joints2d.shape == (16, 17, 2)
    assert flags.sum() == 8 and not flags[:8].any()
    np.testing.assert_array_equal(world[:8], poses[:8])
