"""Shared domain types, detection ingestion schema and camera projection math."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

REPLAY_FIELDS = (
    "camera_id",
    "frame_index",
    "timestamp",
    "confidence",
    "global_orient",
    "body_pose",
    "translation",
)


class DetectionRejected(ValueError):
    """Detection violates an ingestion invariant (caller drops and counts it)."""


class ReplayLineError(ValueError):
    """A replay-format line could not be parsed."""


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera parameters for the translation <-> image-plane mapping."""

    focal_px: float = 548.0
    principal_point: tuple[float, float] = (256.0, 256.0)
    image_size: tuple[float, float] = (512.0, 512.0)

    def __post_init__(self):
        cx, cy = self.principal_point
        w, h = self.image_size
        if self.focal_px <= 0:
            raise ValueError(f"focal_px must be > 0, got {self.focal_px}")
        if w <= 0 or h <= 0:
            raise ValueError(f"image_size must be positive, got {self.image_size}")
        if not (0 <= cx <= w and 0 <= cy <= h):
            raise ValueError(
                f"principal point {self.principal_point} outside image {self.image_size}"
            )


@dataclass(frozen=True)
class ObsUVZS:
    """Image-space tracking observation; s = 1/z is derived, never set directly."""

    u: float
    v: float
    z: float
    s: float = field(init=False)

    def __post_init__(self):
        if self.z <= 0:
            raise DetectionRejected(f"observation depth must be > 0, got {self.z}")
        object.__setattr__(self, "s", 1.0 / self.z)


def _as_vec(x, n, name):
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape != (n,):
        raise DetectionRejected(f"{name} must have {n} elements, got shape {np.shape(x)}")
    if not np.all(np.isfinite(arr)):
        raise DetectionRejected(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class Detection:
    """One person candidate in one frame, as produced by a monocular 3D estimator.

    ``global_orient`` is the root axis-angle rotation, ``body_pose`` the 23
    remaining joint rotations (flattened to 69 scalars), ``translation`` the
    camera-space position in meters with z > 0.
    """

    camera_id: str
    frame_index: int
    timestamp: float
    confidence: float
    global_orient: np.ndarray
    body_pose: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "global_orient", _as_vec(self.global_orient, 3, "global_orient"))
        object.__setattr__(self, "body_pose", _as_vec(self.body_pose, 69, "body_pose"))
        object.__setattr__(self, "translation", _as_vec(self.translation, 3, "translation"))
        if not (0.0 <= self.confidence <= 1.0):
            raise DetectionRejected(f"confidence must be in [0,1], got {self.confidence}")
        if self.translation[2] <= 0:
            raise DetectionRejected(f"translation z must be > 0, got {self.translation[2]}")

    @property
    def z(self) -> float:
        return float(self.translation[2])


@dataclass(frozen=True)
class MotionFrame:
    """Identity-stamped per-person motion sample (raw or smoothed)."""

    person_id: int
    camera_id: str
    timestamp: float
    global_orient: np.ndarray
    body_pose: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "global_orient", _as_vec(self.global_orient, 3, "global_orient"))
        object.__setattr__(self, "body_pose", _as_vec(self.body_pose, 69, "body_pose"))
        object.__setattr__(self, "translation", _as_vec(self.translation, 3, "translation"))

    def channels(self) -> np.ndarray:
        """All 75 scalar channels in (orient, pose, translation) order."""
        return np.concatenate([self.global_orient, self.body_pose, self.translation])


def project_translation(t, k: CameraIntrinsics) -> ObsUVZS:
    """Project a camera-space translation onto the image plane as (u, v, z, s)."""
    x, y, z = float(t[0]), float(t[1]), float(t[2])
    if z <= 0:
        raise DetectionRejected(f"cannot project translation with z={z} <= 0")
    cx, cy = k.principal_point
    u = k.focal_px * x / z + cx
    v = k.focal_px * y / z + cy
    return ObsUVZS(u=u, v=v, z=z)


def unproject_obs(o: ObsUVZS, k: CameraIntrinsics) -> np.ndarray:
    """Exact inverse of :func:`project_translation`; returns (x, y, z) meters."""
    if o.z <= 0:
        raise DetectionRejected(f"cannot unproject observation with z={o.z} <= 0")
    cx, cy = k.principal_point
    x = (o.u - cx) * o.z / k.focal_px
    y = (o.v - cy) * o.z / k.focal_px
    return np.array([x, y, o.z], dtype=np.float64)


# --- replay file line codec ---------------------------------------------------
#
# One detection per line, UTF-8 JSON object. Lines starting with '#' are
# comments. Unknown keys are ignored on read; writing uses a fixed key order
# so that identical detections serialize to identical bytes.


def detection_to_dict(det: Detection) -> dict:
    return {
        "camera_id": det.camera_id,
        "frame_index": det.frame_index,
        "timestamp": det.timestamp,
        "confidence": det.confidence,
        "global_orient": det.global_orient.tolist(),
        "body_pose": det.body_pose.tolist(),
        "translation": det.translation.tolist(),
    }


def detection_from_dict(rec: dict) -> Detection:
    if not isinstance(rec, dict):
        raise ReplayLineError("record is not an object")
    missing = [k for k in REPLAY_FIELDS if k not in rec]
    if missing:
        raise ReplayLineError(f"missing keys: {missing}")
    try:
        return Detection(
            camera_id=str(rec["camera_id"]),
            frame_index=int(rec["frame_index"]),
            timestamp=float(rec["timestamp"]),
            confidence=float(rec["confidence"]),
            global_orient=rec["global_orient"],
            body_pose=rec["body_pose"],
            translation=rec["translation"],
        )
    except (DetectionRejected, TypeError, ValueError) as e:
        raise ReplayLineError(str(e)) from None


def detection_to_line(det: Detection) -> str:
    return json.dumps(detection_to_dict(det), separators=(",", ":"), allow_nan=False)


def detection_from_line(line: str) -> Detection:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise ReplayLineError(f"invalid JSON: {e}") from None
    return detection_from_dict(rec)


def motion_frame_close(a: MotionFrame, b: MotionFrame, tol: float = 0.0) -> bool:
    """Field-wise comparison helper (exact when tol=0)."""
    if (a.person_id, a.camera_id) != (b.person_id, b.camera_id):
        return False
    if not math.isclose(a.timestamp, b.timestamp, rel_tol=0.0, abs_tol=tol):
        return False
    for fa, fb in ((a.global_orient, b.global_orient), (a.body_pose, b.body_pose), (a.translation, b.translation)):
        if not np.allclose(fa, fb, rtol=0.0, atol=tol):
            return False
    return True
