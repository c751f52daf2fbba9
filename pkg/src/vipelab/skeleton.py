"""Joint topology and canonical bone lengths.

A skeleton file is a JSON document::

    {
      "name": "h36m17",
      "joints": [
        {"name": "pelvis", "parent": null, "length": 0.0, "direction": [0, 0, 0]},
        {"name": "r_hip",  "parent": "pelvis", "length": 0.13, "direction": [0, 1, 0]},
        ...
      ],
      "root": "pelvis", "left_hip": "l_hip", "right_hip": "r_hip", "spine": "spine"
    }

``length`` is the bone from the parent to the joint (0 for the root) and
``direction`` is the rest-pose bone direction used by forward kinematics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

ROOT_PARENT = -1


@dataclass(frozen=True)
class Skeleton:
    joint_names: tuple[str, ...]
    parent: tuple[int, ...]
    bone_lengths: tuple[float, ...]
    root_idx: int
    left_hip_idx: int
    right_hip_idx: int
    spine_idx: int
    rest_directions: tuple[tuple[float, float, float], ...] = field(default=())
    name: str = "custom"

    def __post_init__(self):
        n = len(self.joint_names)
        if len(self.parent) != n or len(self.bone_lengths) != n:
            raise ConfigError("joint_names, parent and bone_lengths must have equal length")
        if self.rest_directions and len(self.rest_directions) != n:
            raise ConfigError("rest_directions must have one entry per joint")
        for idx in (self.root_idx, self.left_hip_idx, self.right_hip_idx, self.spine_idx):
            if not 0 <= idx < n:
                raise ConfigError(f"joint index {idx} out of range")
        special = {self.left_hip_idx, self.right_hip_idx, self.spine_idx}
        if len(special) != 3 or self.root_idx in special:
            raise ConfigError("left hip, right hip and spine must be distinct non-root joints")
        if self.parent[self.root_idx] != ROOT_PARENT:
            raise ConfigError("root joint must not have a parent")
        for j, length in enumerate(self.bone_lengths):
            if j != self.root_idx and not length > 0:
                raise ConfigError(f"bone length of joint {self.joint_names[j]!r} must be > 0")
        # every joint must reach the root without cycles
        for j in range(n):
            seen = set()
            k = j
            while k != self.root_idx:
                if k in seen or self.parent[k] == ROOT_PARENT:
                    raise ConfigError(f"joint {self.joint_names[j]!r} is not connected to the root")
                seen.add(k)
                k = self.parent[k]
                if not 0 <= k < n:
                    raise ConfigError(f"parent index {k} out of range")

    @property
    def n_joints(self) -> int:
        return len(self.joint_names)

    def order(self) -> list[int]:
        """Joint indices sorted so every parent precedes its children."""
        children: dict[int, list[int]] = {j: [] for j in range(self.n_joints)}
        for j, p in enumerate(self.parent):
            if p != ROOT_PARENT:
                children[p].append(j)
        out, stack = [], [self.root_idx]
        while stack:
            j = stack.pop(0)
            out.append(j)
            stack.extend(children[j])
        return out

    def bones(self) -> list[tuple[int, int]]:
        return [(self.parent[j], j) for j in self.order() if j != self.root_idx]

    def index(self, name: str) -> int:
        try:
            return self.joint_names.index(name)
        except ValueError:
            raise ConfigError(f"unknown joint {name!r}") from None

    def to_dict(self) -> dict:
        dirs = self.rest_directions or ((0.0, 0.0, 0.0),) * self.n_joints
        joints = []
        for j, name in enumerate(self.joint_names):
            p = self.parent[j]
            joints.append({
                "name": name,
                "parent": None if p == ROOT_PARENT else self.joint_names[p],
                "length": float(self.bone_lengths[j]),
                "direction": [float(v) for v in dirs[j]],
            })
        return {
            "name": self.name,
            "joints": joints,
            "root": self.joint_names[self.root_idx],
            "left_hip": self.joint_names[self.left_hip_idx],
            "right_hip": self.joint_names[self.right_hip_idx],
            "spine": self.joint_names[self.spine_idx],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Skeleton":
        try:
            joints = doc["joints"]
            names = tuple(j["name"] for j in joints)
            lookup = {n: i for i, n in enumerate(names)}
            parent = tuple(ROOT_PARENT if j.get("parent") is None else lookup[j["parent"]]
                           for j in joints)
            lengths = tuple(float(j.get("length", 0.0)) for j in joints)
            dirs = tuple(tuple(float(v) for v in j.get("direction", (0.0, 0.0, 0.0)))
                         for j in joints)
            return cls(
                joint_names=names,
                parent=parent,
                bone_lengths=lengths,
                root_idx=lookup[doc["root"]],
                left_hip_idx=lookup[doc["left_hip"]],
                right_hip_idx=lookup[doc["right_hip"]],
                spine_idx=lookup[doc["spine"]],
                rest_directions=dirs,
                name=doc.get("name", "custom"),
            )
        except KeyError as exc:
            raise ConfigError(f"skeleton file missing or referencing unknown key: {exc}") from None


def load_skeleton(path: str | Path) -> Skeleton:
    with open(path, encoding="utf-8") as fh:
        return Skeleton.from_dict(json.load(fh))


def save_skeleton(skel: Skeleton, path: str | Path) -> None:
    Path(path).write_text(json.dumps(skel.to_dict(), indent=2) + "\n", encoding="utf-8")


# H3.6M-style 17 joint layout; lengths in metres of a synthetic adult.
# The subject faces -x in its rest pose, so its left side is -y.
_DEFAULT_JOINTS = [
    # name, parent, length, rest direction
    ("pelvis", None, 0.0, (0, 0, 0)),
    ("r_hip", "pelvis", 0.13, (0, 1, 0)),
    ("r_knee", "r_hip", 0.45, (0, 0, -1)),
    ("r_ankle", "r_knee", 0.44, (0, 0, -1)),
    ("l_hip", "pelvis", 0.13, (0, -1, 0)),
    ("l_knee", "l_hip", 0.45, (0, 0, -1)),
    ("l_ankle", "l_knee", 0.44, (0, 0, -1)),
    ("spine", "pelvis", 0.23, (0, 0, 1)),
    ("thorax", "spine", 0.25, (0, 0, 1)),
    ("neck", "thorax", 0.11, (0, 0, 1)),
    ("head", "neck", 0.12, (0, 0, 1)),
    ("l_shoulder", "thorax", 0.15, (0, -1, 0)),
    ("l_elbow", "l_shoulder", 0.28, (0, 0, -1)),
    ("l_wrist", "l_elbow", 0.25, (0, 0, -1)),
    ("r_shoulder", "thorax", 0.15, (0, 1, 0)),
    ("r_elbow", "r_shoulder", 0.28, (0, 0, -1)),
    ("r_wrist", "r_elbow", 0.25, (0, 0, -1)),
]


def default_skeleton() -> Skeleton:
    return Skeleton.from_dict({
        "name": "h36m17",
        "joints": [
            {"name": n, "parent": p, "length": length, "direction": list(d)}
            for n, p, length, d in _DEFAULT_JOINTS
        ],
        "root": "pelvis",
        "left_hip": "l_hip",
        "right_hip": "r_hip",
        "spine": "spine",
    })


def rest_pose(skel: Skeleton) -> np.ndarray:
    """Joint positions with every bone along its rest direction, root at the origin."""
    pose = np.zeros((skel.n_joints, 3))
    for p, j in skel.bones():
        d = np.asarray(skel.rest_directions[j], dtype=float)
        pose[j] = pose[p] + skel.bone_lengths[j] * d / np.linalg.norm(d)
    return pose
