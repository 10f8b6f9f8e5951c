"""Per-camera processing stage: association tracking then per-track smoothing.

One pipeline per camera, strictly sequential. Forward kinematics happens
later, at room tick time, so the broadcast runs it exactly once per entry.
"""

from __future__ import annotations

import time

from .core import CameraIntrinsics, Detection, MotionFrame, unproject_obs
from .metrics import MetricsRegistry
from .smoothing import SmoothingParams
from .tracking import NonMonotoneTimestamp, Tracker, TrackerConfig


class CameraPipeline:
    def __init__(
        self,
        camera_id: str,
        intrinsics: CameraIntrinsics | None = None,
        tracker_cfg: TrackerConfig | None = None,
        smoothing: SmoothingParams | None = None,
        registry: MetricsRegistry | None = None,
    ):
        self.camera_id = camera_id
        self.k = intrinsics or CameraIntrinsics()
        self.tracker = Tracker(self.k, tracker_cfg, smoothing)
        self.registry = registry or MetricsRegistry()
        prefix = f"camera.{camera_id}"
        self._prefix = prefix
        self.frames_in = self.registry.counter(f"{prefix}.frames_in")
        self.frames_processed = self.registry.counter(f"{prefix}.frames_processed")
        self.frames_rejected = self.registry.counter(f"{prefix}.frames_rejected")
        self.detections_in = self.registry.counter(f"{prefix}.detections_in")
        self.detections_rejected = self.registry.counter(f"{prefix}.detections_rejected")
        self.person_frames = self.registry.counter(f"{prefix}.person_frames")
        self.stage_track = self.registry.histogram(f"{prefix}.stage_track")
        self.stage_smooth = self.registry.histogram(f"{prefix}.stage_smooth")

    def process(self, detections: list[Detection], t: float | None = None) -> list[tuple[int, MotionFrame]]:
        """One camera frame in, zero or more (track_id, smoothed MotionFrame) out.

        Frames that violate timestamp monotonicity are rejected and counted,
        leaving tracker state untouched.
        """
        self.frames_in.inc()
        self.detections_in.inc(len(detections))
        t0 = time.monotonic()
        try:
            emitted = self.tracker.step(detections, t)
        except (NonMonotoneTimestamp, ValueError):
            self.frames_rejected.inc()
            self.detections_rejected.inc(len(detections))
            return []
        t1 = time.monotonic()

        out: list[tuple[int, MotionFrame]] = []
        for tid, det in emitted:
            track = self.tracker.tracks[tid]
            # translation comes from the filtered image-space state, not the
            # raw detection: the Kalman estimate is what made the identity
            raw = MotionFrame(
                person_id=tid,
                camera_id=self.camera_id,
                timestamp=det.timestamp,
                global_orient=det.global_orient,
                body_pose=det.body_pose,
                translation=unproject_obs(track.observation(), self.k),
            )
            smoothed = track.filters.smooth(raw)
            if smoothed is not None:
                out.append((tid, smoothed))
        t2 = time.monotonic()

        self.stage_track.record(t1 - t0)
        self.stage_smooth.record(t2 - t1)
        self.frames_processed.inc()
        self.person_frames.inc(len(out))
        self.registry.set_gauge(f"{self._prefix}.tracks_active", self.tracker.active_count())
        return out
