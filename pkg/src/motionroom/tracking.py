"""Per-camera multi-person identity association over (u, v, z, s) observations.

Two-stage confidence-gated matching: high-confidence detections are assigned
to all predicted tracks by minimum total cost, then low-confidence detections
recover still-unmatched active tracks. Track state is a constant-velocity
linear-Gaussian filter over (u, v, s) plus velocities; z is re-derived as 1/s.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import CameraIntrinsics, Detection, ObsUVZS, project_translation
from .smoothing import SmoothingBank, SmoothingParams

# s-channel noise scale relative to the pixel channels (s is ~1/meters, three
# orders of magnitude below u/v in typical indoor scenes).
_S_NOISE_RATIO = 1e-3


class NonMonotoneTimestamp(ValueError):
    """Step timestamp does not advance the tracker clock; state unchanged."""


@dataclass(frozen=True)
class TrackerConfig:
    tau_high: float = 0.5
    tau_low: float = 0.1
    gate: float = 0.25
    max_misses: int = 30
    min_hits: int = 3
    lambda_s: float = 1.0
    s_min: float = 0.01
    process_noise: float = 30.0   # px / sqrt(s), position random walk
    obs_noise: float = 2.0        # px

    def __post_init__(self):
        if not (0.0 <= self.tau_low < self.tau_high <= 1.0):
            raise ValueError(f"need 0 <= tau_low < tau_high <= 1, got {self.tau_low}, {self.tau_high}")
        if self.gate <= 0:
            raise ValueError(f"gate must be > 0, got {self.gate}")
        if self.max_misses < 1 or self.min_hits < 1:
            raise ValueError("max_misses and min_hits must be >= 1")
        if self.lambda_s < 0 or self.s_min <= 0:
            raise ValueError("lambda_s must be >= 0 and s_min > 0")
        if self.process_noise <= 0 or self.obs_noise <= 0:
            raise ValueError("noise scales must be > 0")


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    ACTIVE = "active"
    LOST = "lost"


# --- constant-velocity filter ----------------------------------------------


def transition_matrix(dt: float) -> np.ndarray:
    f = np.eye(6)
    f[0, 3] = f[1, 4] = f[2, 5] = dt
    return f


def process_noise_cov(dt: float, cfg: TrackerConfig) -> np.ndarray:
    # Noise enters the position components only, linear in dt, so that two
    # half-interval predictions compose exactly to one full prediction.
    q = cfg.process_noise**2 * dt
    return np.diag([q, q, q * _S_NOISE_RATIO**2, 0.0, 0.0, 0.0])


def obs_noise_cov(cfg: TrackerConfig) -> np.ndarray:
    r = cfg.obs_noise**2
    return np.diag([r, r, r * _S_NOISE_RATIO**2])


_H = np.hstack([np.eye(3), np.zeros((3, 3))])


def kf_initiate(obs: ObsUVZS, cfg: TrackerConfig) -> tuple[np.ndarray, np.ndarray]:
    mean = np.array([obs.u, obs.v, obs.s, 0.0, 0.0, 0.0])
    r = cfg.obs_noise
    cov = np.diag(
        [
            (2 * r) ** 2,
            (2 * r) ** 2,
            (2 * r * _S_NOISE_RATIO) ** 2,
            (10 * r) ** 2,                      # velocities unknown at spawn
            (10 * r) ** 2,
            (10 * r * _S_NOISE_RATIO) ** 2,
        ]
    )
    return mean, cov


def kf_predict(mean: np.ndarray, cov: np.ndarray, dt: float, cfg: TrackerConfig) -> tuple[np.ndarray, np.ndarray]:
    f = transition_matrix(dt)
    mean = f @ mean
    cov = f @ cov @ f.T + process_noise_cov(dt, cfg)
    mean[2] = max(mean[2], cfg.s_min)
    return mean, cov


def kf_update(mean: np.ndarray, cov: np.ndarray, obs: ObsUVZS, cfg: TrackerConfig) -> tuple[np.ndarray, np.ndarray]:
    z = np.array([obs.u, obs.v, obs.s])
    innov = z - _H @ mean
    s = _H @ cov @ _H.T + obs_noise_cov(cfg)
    gain = cov @ _H.T @ np.linalg.inv(s)
    mean = mean + gain @ innov
    cov = (np.eye(6) - gain @ _H) @ cov
    cov = 0.5 * (cov + cov.T)
    mean[2] = max(mean[2], cfg.s_min)
    return mean, cov


# --- assignment --------------------------------------------------------------


def min_cost_assignment(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-total-cost bipartite matching, ties broken lexicographically.

    Among assignments of equal total cost, the one whose (row, column) pair
    list is lexicographically smallest wins: row 0 gets the lowest feasible
    column, then row 1, and so on. Rows and columns are the caller's track and
    detection orderings, so results are deterministic.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    if n == 0 or m == 0:
        return []
    rows, cols = linear_sum_assignment(cost)
    best = float(cost[rows, cols].sum())
    tol = 1e-9 * max(1.0, abs(best))

    pairs: list[tuple[int, int]] = []
    free_cols = list(range(m))
    remaining = best
    for i in range(n):
        rest_rows = np.arange(i + 1, n)
        matched_col = None
        for j in free_cols:
            other_cols = [c for c in free_cols if c != j]
            sub = cost[np.ix_(rest_rows, other_cols)] if len(rest_rows) and len(other_cols) else np.zeros((0, 0))
            if min(len(rest_rows), len(other_cols)) > 0:
                r2, c2 = linear_sum_assignment(sub)
                completion = float(sub[r2, c2].sum())
            else:
                completion = 0.0
            if cost[i, j] + completion <= remaining + tol:
                matched_col = j
                remaining -= cost[i, j]
                break
        if matched_col is not None:
            pairs.append((i, matched_col))
            free_cols.remove(matched_col)
        # matched_col is None only when rows outnumber columns and row i is
        # one of the unmatched leftovers of every optimal assignment
    return pairs


def assignment_total(cost: np.ndarray, pairs) -> float:
    return math.fsum(float(cost[i, j]) for i, j in pairs)


# --- tracks -------------------------------------------------------------------


@dataclass
class Track:
    track_id: int
    mean: np.ndarray
    cov: np.ndarray
    status: TrackStatus
    hits: int
    misses: int
    last_detection: Detection
    filters: SmoothingBank = field(repr=False)

    def observation(self) -> ObsUVZS:
        """Current filtered state as an observation (z re-derived from s)."""
        return ObsUVZS(u=float(self.mean[0]), v=float(self.mean[1]), z=1.0 / float(self.mean[2]))


def association_cost(track: Track, obs: ObsUVZS, k: CameraIntrinsics, cfg: TrackerConfig) -> float:
    """Normalized image-plane distance plus a relative scale term."""
    w, h = k.image_size
    du = (track.mean[0] - obs.u) / w
    dv = (track.mean[1] - obs.v) / h
    s_t = float(track.mean[2])
    ds = (s_t - obs.s) / max(s_t, obs.s)
    return math.sqrt(du * du + dv * dv + cfg.lambda_s * ds * ds)


def associate(
    tracks: list[Track],
    detections: list[Detection],
    k: CameraIntrinsics,
    cfg: TrackerConfig,
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Two-stage confidence-gated matching over predicted tracks.

    Returns (matches as (track_id, detection_index) pairs, unmatched track
    ids, unmatched high-confidence detection indices). Low-confidence
    leftovers are dropped.
    """
    high = [i for i, d in enumerate(detections) if d.confidence >= cfg.tau_high]
    low = [i for i, d in enumerate(detections) if cfg.tau_low <= d.confidence < cfg.tau_high]

    obs = {}
    for i in high + low:
        obs[i] = project_translation(detections[i].translation, k)

    def run_stage(stage_tracks: list[Track], det_idx: list[int]):
        if not stage_tracks or not det_idx:
            return [], list(range(len(stage_tracks))), list(det_idx)
        cost = np.array(
            [[association_cost(t, obs[j], k, cfg) for j in det_idx] for t in stage_tracks]
        )
        pairs = min_cost_assignment(cost)
        kept = [(r, c) for r, c in pairs if cost[r, c] <= cfg.gate]
        matched_rows = {r for r, _ in kept}
        matched_cols = {c for _, c in kept}
        un_rows = [r for r in range(len(stage_tracks)) if r not in matched_rows]
        un_dets = [det_idx[c] for c in range(len(det_idx)) if c not in matched_cols]
        return [(stage_tracks[r].track_id, det_idx[c]) for r, c in kept], un_rows, un_dets

    matches, un_rows, un_high = run_stage(tracks, high)

    stage2_tracks = [tracks[r] for r in un_rows if tracks[r].status is TrackStatus.ACTIVE]
    m2, un2_rows, _ = run_stage(stage2_tracks, low)
    matches += m2

    matched_ids = {tid for tid, _ in matches}
    unmatched_tracks = [t.track_id for t in tracks if t.track_id not in matched_ids]
    return matches, unmatched_tracks, un_high


class Tracker:
    """Single-camera tracker; ``step`` is strictly sequential per camera."""

    def __init__(
        self,
        intrinsics: CameraIntrinsics | None = None,
        cfg: TrackerConfig | None = None,
        smoothing: SmoothingParams | None = None,
    ):
        self.k = intrinsics or CameraIntrinsics()
        self.cfg = cfg or TrackerConfig()
        self.smoothing = smoothing or SmoothingParams()
        self.tracks: dict[int, Track] = {}
        self.last_t: float | None = None
        self._next_id = 1
        self.spawned = 0

    def _spawn(self, det: Detection) -> Track:
        obs = project_translation(det.translation, self.k)
        mean, cov = kf_initiate(obs, self.cfg)
        track = Track(
            track_id=self._next_id,
            mean=mean,
            cov=cov,
            status=TrackStatus.TENTATIVE,
            hits=1,
            misses=0,
            last_detection=det,
            filters=SmoothingBank(self.smoothing),
        )
        self._next_id += 1
        self.spawned += 1
        self.tracks[track.track_id] = track
        return track

    def step(self, detections: list[Detection], t: float | None = None) -> list[tuple[int, Detection]]:
        """Advance one frame; returns (track_id, detection) for active tracks.

        All detections must share one timestamp, strictly greater than the
        previous step's. ``t`` lets the caller advance the clock on frames
        with no detections (tracks still age by one miss).
        """
        if detections:
            dt0 = detections[0].timestamp
            if any(d.timestamp != dt0 for d in detections):
                raise ValueError("detections within a step must share one timestamp")
            if t is not None and t != dt0:
                raise ValueError(f"frame timestamp {t} != detection timestamp {dt0}")
            t = dt0

        if t is not None and self.last_t is not None and t <= self.last_t:
            raise NonMonotoneTimestamp(f"step timestamp {t} <= previous {self.last_t}")

        ordered = sorted(self.tracks.values(), key=lambda tr: tr.track_id)
        if t is not None and self.last_t is not None:
            dt = t - self.last_t
            for tr in ordered:
                tr.mean, tr.cov = kf_predict(tr.mean, tr.cov, dt, self.cfg)

        matches, unmatched_ids, spawn_idx = associate(ordered, detections, self.k, self.cfg)

        for tid, di in matches:
            tr = self.tracks[tid]
            det = detections[di]
            obs = project_translation(det.translation, self.k)
            tr.mean, tr.cov = kf_update(tr.mean, tr.cov, obs, self.cfg)
            tr.hits += 1
            tr.misses = 0
            tr.last_detection = det
            if tr.status is TrackStatus.LOST:
                tr.status = TrackStatus.ACTIVE
            elif tr.status is TrackStatus.TENTATIVE and tr.hits >= self.cfg.min_hits:
                tr.status = TrackStatus.ACTIVE

        for tid in unmatched_ids:
            tr = self.tracks[tid]
            tr.misses += 1
            if tr.status is TrackStatus.ACTIVE:
                tr.status = TrackStatus.LOST
            if tr.misses > self.cfg.max_misses:
                del self.tracks[tid]

        emitted = {tid: di for tid, di in matches}
        for di in spawn_idx:
            tr = self._spawn(detections[di])
            if tr.hits >= self.cfg.min_hits:
                tr.status = TrackStatus.ACTIVE
            emitted[tr.track_id] = di

        if t is not None:
            self.last_t = t

        out = []
        for tid in sorted(emitted):
            tr = self.tracks.get(tid)
            if tr is not None and tr.status is TrackStatus.ACTIVE:
                out.append((tid, detections[emitted[tid]]))
        return out

    def active_count(self) -> int:
        return sum(1 for t in self.tracks.values() if t.status is TrackStatus.ACTIVE)
