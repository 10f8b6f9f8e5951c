"""Forward kinematics over a fixed 24-joint skeleton driven by axis-angle poses."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .core import MotionFrame

JOINT_COUNT = 24


class SkeletonError(ValueError):
    """Skeleton file fails structural validation."""


@dataclass(frozen=True)
class Skeleton:
    """Kinematic tree: 24 named joints, parent indices and rest-pose offsets.

    ``parent[0]`` is -1 (root); every other joint's parent precedes it, so a
    single forward pass computes world transforms.
    """

    joint_names: tuple[str, ...]
    parent: np.ndarray
    rest_offsets: np.ndarray

    def __post_init__(self):
        names = tuple(str(n) for n in self.joint_names)
        parent = np.asarray(self.parent, dtype=np.int64).reshape(-1)
        offsets = np.asarray(self.rest_offsets, dtype=np.float64)
        if len(names) != JOINT_COUNT:
            raise SkeletonError(f"skeleton must have {JOINT_COUNT} joints, got {len(names)}")
        if parent.shape != (JOINT_COUNT,) or offsets.shape != (JOINT_COUNT, 3):
            raise SkeletonError("parent/rest_offsets have wrong shape")
        if parent[0] != -1:
            raise SkeletonError("joint 0 must be the root (parent -1)")
        for i in range(1, JOINT_COUNT):
            if not (0 <= parent[i] < i):
                raise SkeletonError(f"parent[{i}]={parent[i]} must reference an earlier joint")
        object.__setattr__(self, "joint_names", names)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "rest_offsets", offsets)


@dataclass(frozen=True)
class SkeletonPose:
    """World-space joint positions and rotations for one person."""

    person_id: int
    joint_positions: np.ndarray   # (24, 3) meters
    joint_rotations: np.ndarray   # (24, 3, 3)


def axis_angle_to_matrix(r) -> np.ndarray:
    """Rodrigues rotation for a single axis-angle 3-vector."""
    return axis_angle_to_matrices(np.asarray(r, dtype=np.float64).reshape(1, 3))[0]


def axis_angle_to_matrices(r: np.ndarray) -> np.ndarray:
    """Vectorized Rodrigues: (N, 3) axis-angle vectors -> (N, 3, 3) rotations.

    Near zero angle the sin/ (1-cos) factors switch to their second-order
    Taylor expansions to avoid 0/0.
    """
    r = np.asarray(r, dtype=np.float64)
    n = r.shape[0]
    theta = np.linalg.norm(r, axis=1)
    small = theta < 1e-8

    # sin(t)/t and (1-cos t)/t^2, with Taylor fallbacks near t=0
    t2 = theta * theta
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(small, 1.0 - t2 / 6.0, np.sin(theta) / np.where(small, 1.0, theta))
        b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(theta)) / np.where(small, 1.0, t2))

    k = np.zeros((n, 3, 3))
    k[:, 0, 1] = -r[:, 2]
    k[:, 0, 2] = r[:, 1]
    k[:, 1, 0] = r[:, 2]
    k[:, 1, 2] = -r[:, 0]
    k[:, 2, 0] = -r[:, 1]
    k[:, 2, 1] = r[:, 0]

    eye = np.broadcast_to(np.eye(3), (n, 3, 3))
    return eye + a[:, None, None] * k + b[:, None, None] * (k @ k)


def forward_kinematics(skel: Skeleton, frame: MotionFrame) -> SkeletonPose:
    """Compose per-joint rotations down the tree from the root.

    The root rotation is the frame's global orientation and the root position
    its translation; child positions are parent position plus the parent's
    world rotation applied to the child's rest offset.
    """
    local = np.empty((JOINT_COUNT, 3))
    local[0] = frame.global_orient
    local[1:] = frame.body_pose.reshape(23, 3)
    rot_local = axis_angle_to_matrices(local)

    world_rot = np.empty((JOINT_COUNT, 3, 3))
    world_pos = np.empty((JOINT_COUNT, 3))
    world_rot[0] = rot_local[0]
    world_pos[0] = frame.translation
    parent = skel.parent
    offsets = skel.rest_offsets
    for i in range(1, JOINT_COUNT):
        p = parent[i]
        world_rot[i] = world_rot[p] @ rot_local[i]
        world_pos[i] = world_pos[p] + world_rot[p] @ offsets[i]
    return SkeletonPose(person_id=frame.person_id, joint_positions=world_pos, joint_rotations=world_rot)


# --- skeleton file format -------------------------------------------------
#
# Line-delimited JSON, exactly 24 lines (order defines joint index), each:
#   {"name": str, "parent": int, "offset": [x, y, z]}


def skeleton_from_rows(rows) -> Skeleton:
    """Build a skeleton from parsed {"name", "parent", "offset"} records."""
    names, parents, offsets = [], [], []
    for i, rec in enumerate(rows):
        try:
            names.append(str(rec["name"]))
            parents.append(int(rec["parent"]))
            off = [float(v) for v in rec["offset"]]
        except (KeyError, TypeError, ValueError) as e:
            raise SkeletonError(f"skeleton row {i}: {e}") from None
        if len(off) != 3:
            raise SkeletonError(f"skeleton row {i}: offset must have 3 elements")
        offsets.append(off)
    if len(names) != JOINT_COUNT:
        raise SkeletonError(f"skeleton must have {JOINT_COUNT} joints, got {len(names)}")
    return Skeleton(joint_names=tuple(names), parent=np.array(parents), rest_offsets=np.array(offsets))


def parse_skeleton_lines(lines) -> Skeleton:
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise SkeletonError(f"skeleton line {lineno}: {e}") from None
    return skeleton_from_rows(rows)


def load_skeleton(path) -> Skeleton:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_skeleton_lines(fh)


def skeleton_to_lines(skel: Skeleton) -> list[str]:
    return [
        json.dumps(
            {"name": skel.joint_names[i], "parent": int(skel.parent[i]), "offset": skel.rest_offsets[i].tolist()},
            separators=(",", ":"),
        )
        for i in range(JOINT_COUNT)
    ]


_DEFAULT: Skeleton | None = None


def default_skeleton() -> Skeleton:
    """The built-in 24-joint skeleton with average human rest offsets."""
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("motionroom.data").joinpath("smpl_skeleton.jsonl").read_text("utf-8")
        _DEFAULT = parse_skeleton_lines(text.splitlines())
    return _DEFAULT
