import json
from dataclasses import replace

import numpy as np
import pytest

from vipelab.camera import Camera, project
from vipelab.errors import ConfigError, DatasetError
from vipelab.skeleton import (Skeleton, default_skeleton, load_skeleton, rest_pose, save_skeleton)
from vipelab.synth import (GeneratorConfig, default_rig, format_pose_record, generate_dataset,
                           read_dataset, read_pose_records, sample_pose, write_pose_records)


# ---- skeleton

def test_default_skeleton(skel):
    assert skel.n_joints == 17
    assert skel.joint_names[skel.root_idx] == "pelvis"
    order = skel.order()
    assert order[0] == skel.root_idx
    pos = {j: i for i, j in enumerate(order)}
    assert all(pos[p] < pos[j] for p, j in skel.bones())


def test_skeleton_roundtrip(tmp_path, skel):
    save_skeleton(skel, tmp_path / "s.json")
    assert load_skeleton(tmp_path / "s.json") == skel


@pytest.mark.parametrize("mutate", [
    lambda d: d["joints"][1].update(length=0.0),
    lambda d: d.update(spine="pelvis"),
    lambda d: d.update(left_hip="r_hip"),
    lambda d: d["joints"][2].update(parent="r_ankle"),
    lambda d: d["joints"][0].update(parent="r_hip"),
    lambda d: d.update(root="nope"),
])
def test_skeleton_validation(skel, mutate):
    doc = json.loads(json.dumps(skel.to_dict()))
    mutate(doc)
    with pytest.raises(ConfigError):
        Skeleton.from_dict(doc)


def test_rest_pose_bone_lengths(skel):
    p = rest_pose(skel)
    for parent, j in skel.bones():
        assert np.linalg.norm(p[j] - p[parent]) == pytest.approx(skel.bone_lengths[j])


# ---- sampling

def test_zero_ranges_give_rest_pose(skel):
    cfg = GeneratorConfig.zero_ranges(skel)
    np.testing.assert_allclose(sample_pose(np.random.default_rng(0), skel, cfg), rest_pose(skel), atol=1e-15)


def test_sampled_bone_lengths_exact(skel):
    rng = np.random.default_rng(0)
    cfg = GeneratorConfig()
    for _ in range(50):
        p = sample_pose(rng, skel, cfg)
        for parent, j in skel.bones():
            assert np.linalg.norm(p[j] - p[parent]) == pytest.approx(skel.bone_lengths[j], abs=1e-12)


def test_sampling_deterministic(skel):
    a = sample_pose(np.random.default_rng(9), skel, GeneratorConfig())
    b = sample_pose(np.random.default_rng(9), skel, GeneratorConfig())
    assert a.tobytes() == b.tobytes()


def test_poses_stay_in_front_of_rig(skel):
    rng = np.random.default_rng(1)
    cfg = GeneratorConfig()
    for _ in range(200):
        p = sample_pose(rng, skel, cfg)
        for cam in default_rig():
            project(p, cam)


def test_config_validation():
    with pytest.raises(ConfigError):
        GeneratorConfig(splits=(0.5, 0.2, 0.2))
    with pytest.raises(ConfigError):
        GeneratorConfig(n_poses=-1)
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict({"angle_ranges": {"r_knee": [[1, 0], [0, 0], [0, 0]]}})
    with pytest.raises(ConfigError):
        GeneratorConfig.from_dict({"bogus": 1})
    cfg = GeneratorConfig(n_poses=7, seed=3)
    assert GeneratorConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


# ---- dataset files

def test_dataset_roundtrip(tmp_path, skel):
    cfg = GeneratorConfig(n_poses=40, seed=5)
    m = generate_dataset(cfg, skel, tmp_path / "ds")
    assert m.n_records == 40 * len(cfg.rig)
    assert sum(m.split_counts.values()) == 40
    ds = read_dataset(tmp_path / "ds")
    rng = np.random.default_rng(5)
    expected = np.stack([sample_pose(rng, skel, cfg) for _ in range(40)])
    for pid in range(40):
        rows = np.flatnonzero(ds.ids == pid)
        assert len(rows) == len(cfg.rig)
        assert len(set(ds.splits[rows])) == 1  # every view of a pose shares its split
        for r in rows:
            assert ds.joints3d[r].tobytes() == expected[pid].tobytes()
            cam = ds.cameras[ds.camera_ids[r]]
            np.testing.assert_allclose(ds.joints2d[r], project(ds.joints3d[r], cam), atol=1e-9)
    assert ds.skeleton == skel


def test_dataset_deterministic(tmp_path, skel):
    cfg = GeneratorConfig(n_poses=10, seed=2)
    generate_dataset(cfg, skel, tmp_path / "a")
    generate_dataset(cfg, skel, tmp_path / "b")
    for name in ("records.jsonl", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_empty_dataset(tmp_path, skel):
    m = generate_dataset(GeneratorConfig(n_poses=0), skel, tmp_path / "e")
    assert m.n_records == 0
    ds = read_dataset(tmp_path / "e")
    assert len(ds.ids) == 0


def test_split_fractions(tmp_path, skel):
    m = generate_dataset(GeneratorConfig(n_poses=100, splits=(0.6, 0.3, 0.1)), skel, tmp_path / "s")
    assert m.split_counts == {"train": 60, "val": 30, "test": 10}


def test_read_errors(tmp_path, skel):
    with pytest.raises(DatasetError):
        read_dataset(tmp_path / "missing")
    generate_dataset(GeneratorConfig(n_poses=3), skel, tmp_path / "t")
    rec = tmp_path / "t" / "records.jsonl"
    rec.write_text("\n".join(rec.read_text().splitlines()[:-1]) + "\n")
    with pytest.raises(DatasetError):
        read_dataset(tmp_path / "t")


def test_pose_records_roundtrip(tmp_path):
    x = np.random.default_rng(0).normal(size=(2, 17, 3))
    write_pose_records([{"id": 0, "joints3d": x[0]}, {"id": 1, "joints3d": x[1], "alpha": 0.1}],
                       tmp_path / "r.jsonl")
    back = read_pose_records(tmp_path / "r.jsonl")
    assert np.array(back[1]["joints3d"]).tobytes() == x[1].tobytes()
    assert back[1]["alpha"] == 0.1
    (tmp_path / "one.json").write_text(format_pose_record({"id": 4, "embedding": np.arange(3.0)}))
    assert read_pose_records(tmp_path / "one.json")[0]["embedding"] == [0.0, 1.0, 2.0]
    (tmp_path / "bad.jsonl").write_text("{oops\n")
    with pytest.raises(DatasetError):
        read_pose_records(tmp_path / "bad.jsonl")


def test_custom_rig_from_dict():
    cfg = GeneratorConfig.from_dict({"rig": [{"azimuth": 0.5, "elevation": 0.1, "radius": 6.0}]})
    assert cfg.rig == [Camera(azimuth=0.5, elevation=0.1, radius=6.0)]
    assert replace(cfg, seed=1).seed == 1
