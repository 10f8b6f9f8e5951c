"""Detection stream producers and tracking/smoothing quality metrics.

Synthetic scenarios stand in for a neural per-frame estimator: persons follow
parametric paths with a sinusoidal gait, optionally corrupted by Gaussian
noise and dropout, with the noiseless ground truth kept for evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Detection, MotionFrame, ReplayLineError, detection_from_line

TWO_PI = 2.0 * math.pi

# body_pose joint indices driven by the gait (SMPL numbering, root excluded)
GAIT_JOINTS = {
    "left_hip": 1,
    "right_hip": 2,
    "left_knee": 4,
    "right_knee": 5,
    "left_shoulder": 16,
    "right_shoulder": 17,
    "left_elbow": 18,
    "right_elbow": 19,
}


class ScenarioError(ValueError):
    """Scenario spec fails validation before streaming starts."""


@dataclass(frozen=True)
class LinearPath:
    start: tuple[float, float, float]
    velocity: tuple[float, float, float]
    phase: float = 0.0

    def position(self, t: float) -> np.ndarray:
        return np.array(self.start) + t * np.array(self.velocity)


@dataclass(frozen=True)
class CircularPath:
    center: tuple[float, float, float]
    radius: float
    freq: float          # revolutions per second
    phase: float = 0.0

    def position(self, t: float) -> np.ndarray:
        a = TWO_PI * self.freq * t + self.phase
        return np.array(self.center) + self.radius * np.array([math.cos(a), 0.0, math.sin(a)])


Path = LinearPath | CircularPath


@dataclass(frozen=True)
class ScenarioSpec:
    person_count: int = 1
    duration: float = 10.0
    rate: float = 30.0
    paths: tuple[Path, ...] = ()
    gait_amplitude: float = 0.4   # radians
    gait_freq: float = 1.2        # Hz
    noise_sigma_trans: float = 0.0
    noise_sigma_pose: float = 0.0
    dropout_prob: float = 0.0
    confidence_mean: float = 0.9
    confidence_sigma: float = 0.05
    seed: int = 0
    camera_id: str = "cam0"

    def __post_init__(self):
        if self.person_count < 1:
            raise ScenarioError(f"person_count must be >= 1, got {self.person_count}")
        if self.duration <= 0 or self.rate <= 0:
            raise ScenarioError("duration and rate must be > 0")
        if not (0.0 <= self.dropout_prob <= 1.0):
            raise ScenarioError(f"dropout_prob must be in [0,1], got {self.dropout_prob}")
        if self.noise_sigma_trans < 0 or self.noise_sigma_pose < 0 or self.confidence_sigma < 0:
            raise ScenarioError("noise sigmas must be >= 0")
        if not (0.0 <= self.confidence_mean <= 1.0):
            raise ScenarioError("confidence_mean must be in [0,1]")

    def frame_count(self) -> int:
        return int(round(self.duration * self.rate))

    def resolved_paths(self) -> tuple[Path, ...]:
        paths = list(self.paths[: self.person_count])
        for i in range(len(paths), self.person_count):
            lane = (i - (self.person_count - 1) / 2.0) * 0.9
            paths.append(
                LinearPath(
                    start=(lane, 0.0, 2.6 + 0.45 * i),
                    velocity=(0.12 if i % 2 == 0 else -0.12, 0.0, 0.0),
                    phase=i * math.pi / 2.0,
                )
            )
        return tuple(paths)


@dataclass
class ScenarioResult:
    spec: ScenarioSpec
    frames: list[list[Detection]]                     # after noise + dropout
    truth: list[list[tuple[int, Detection]]]          # (person index, noiseless)


def _gait_pose(t: float, amplitude: float, freq: float, phase: float) -> np.ndarray:
    pose = np.zeros(69)
    w = TWO_PI * freq * t + phase
    swing = {
        "left_hip": math.sin(w),
        "right_hip": math.sin(w + math.pi),
        "left_knee": 0.7 * math.sin(w + math.pi / 2),
        "right_knee": 0.7 * math.sin(w + 3 * math.pi / 2),
        "left_shoulder": 0.6 * math.sin(w + math.pi),
        "right_shoulder": 0.6 * math.sin(w),
        "left_elbow": 0.4 * math.sin(w + math.pi / 2),
        "right_elbow": 0.4 * math.sin(w + 3 * math.pi / 2),
    }
    for name, value in swing.items():
        joint = GAIT_JOINTS[name]
        pose[(joint - 1) * 3] = amplitude * value   # swing about the x axis
    return pose


def generate(spec: ScenarioSpec) -> ScenarioResult:
    """Deterministic detection stream plus aligned ground truth.

    Identical (spec, seed) pairs produce bit-identical streams. Dropped
    detections are removed from ``frames`` but stay in ``truth``.
    """
    paths = spec.resolved_paths()
    rng = np.random.default_rng(spec.seed)
    frames: list[list[Detection]] = []
    truth: list[list[tuple[int, Detection]]] = []

    for k in range(spec.frame_count()):
        t = k / spec.rate
        out_frame: list[Detection] = []
        truth_frame: list[tuple[int, Detection]] = []
        for i, path in enumerate(paths):
            phase = getattr(path, "phase", 0.0)
            trans = path.position(t)
            pose = _gait_pose(t, spec.gait_amplitude, spec.gait_freq, phase)
            orient = np.zeros(3)

            clean = Detection(
                camera_id=spec.camera_id,
                frame_index=k,
                timestamp=t,
                confidence=1.0,
                global_orient=orient,
                body_pose=pose,
                translation=trans,
            )
            truth_frame.append((i, clean))

            conf = float(np.clip(rng.normal(spec.confidence_mean, spec.confidence_sigma), 0.0, 1.0))
            noisy_orient = orient + rng.normal(0.0, spec.noise_sigma_pose, 3)
            noisy_pose = pose + rng.normal(0.0, spec.noise_sigma_pose, 69)
            noisy_trans = trans + rng.normal(0.0, spec.noise_sigma_trans, 3)
            noisy_trans[2] = max(noisy_trans[2], 0.1)
            dropped = rng.random() < spec.dropout_prob

            if not dropped:
                out_frame.append(
                    Detection(
                        camera_id=spec.camera_id,
                        frame_index=k,
                        timestamp=t,
                        confidence=conf,
                        global_orient=noisy_orient,
                        body_pose=noisy_pose,
                        translation=noisy_trans,
                    )
                )
        frames.append(out_frame)
        truth.append(truth_frame)
    return ScenarioResult(spec=spec, frames=frames, truth=truth)


# --- canned scenarios --------------------------------------------------------


def default_noisy_scenario(seed: int = 0) -> ScenarioSpec:
    """Single jittery person at 30 Hz for 20 s; the smoothing stress case."""
    return ScenarioSpec(
        person_count=1,
        duration=20.0,
        rate=30.0,
        noise_sigma_pose=0.05,
        noise_sigma_trans=0.01,
        seed=seed,
    )


def crossing_scenario(seed: int = 0) -> ScenarioSpec:
    """Two persons whose image paths intersect while depths stay 1.2 m apart."""
    return ScenarioSpec(
        person_count=2,
        duration=20.0,
        rate=30.0,
        paths=(
            LinearPath(start=(-1.0, 0.0, 2.2), velocity=(0.1, 0.0, 0.0)),
            LinearPath(start=(1.0, 0.0, 3.4), velocity=(-0.1, 0.0, 0.0), phase=math.pi / 2),
        ),
        noise_sigma_trans=0.02,
        noise_sigma_pose=0.05,
        seed=seed,
    )


def named_scenarios() -> dict[str, ScenarioSpec]:
    """Built-in scenarios addressable by name (CLI flags, source controls)."""
    return {
        "default": ScenarioSpec(),
        "duo": ScenarioSpec(person_count=2),
        "trio": ScenarioSpec(person_count=3),
        "noisy": default_noisy_scenario(),
        "crossing": crossing_scenario(),
    }


def walkers_scenario(person_count: int, duration: float = 5.0, seed: int = 0) -> ScenarioSpec:
    """Up to 5 noise-free linear walkers whose image positions stay far apart."""
    if not (1 <= person_count <= 5):
        raise ScenarioError("walkers_scenario supports 1..5 persons")
    # image anchors pairwise > 256 px apart on a 512x512 frame (f=548, z=3)
    anchors_px = [(50.0, 50.0), (462.0, 462.0), (462.0, 50.0), (50.0, 462.0), (256.0, 256.0)]
    z = 3.0
    f = 548.0
    paths = []
    for i in range(person_count):
        u, v = anchors_px[i]
        x, y = (u - 256.0) * z / f, (v - 256.0) * z / f
        vx = 0.05 if i % 2 == 0 else -0.05
        paths.append(LinearPath(start=(x, y, z), velocity=(vx, 0.0, 0.0), phase=i * 1.1))
    return ScenarioSpec(
        person_count=person_count,
        duration=duration,
        rate=30.0,
        paths=tuple(paths),
        confidence_mean=0.95,
        confidence_sigma=0.0,
        seed=seed,
    )


# --- replay -------------------------------------------------------------------


@dataclass
class ReplayData:
    frames: list[list[Detection]]   # grouped by (camera_id, frame_index), file order
    skipped_lines: int


def load_replay(path) -> ReplayData:
    """Parse a replay file; malformed lines are skipped and counted."""
    groups: dict[tuple[str, int], list[Detection]] = {}
    skipped = 0
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                det = detection_from_line(line)
            except ReplayLineError:
                skipped += 1
                continue
            groups.setdefault((det.camera_id, det.frame_index), []).append(det)
    return ReplayData(frames=list(groups.values()), skipped_lines=skipped)


def replay_delays(frames: list[list[Detection]], speed: float) -> list[float]:
    """Pre-frame delivery delays honoring recorded timestamp gaps.

    speed=0 means as fast as possible (all delays zero); speed=2 halves the
    recorded span.
    """
    if speed < 0:
        raise ValueError(f"speed must be >= 0, got {speed}")
    delays = []
    prev_t = None
    for frame in frames:
        t = frame[0].timestamp if frame else prev_t
        if speed == 0 or prev_t is None or t is None:
            delays.append(0.0)
        else:
            delays.append(max(0.0, (t - prev_t) / speed))
        if t is not None:
            prev_t = t
    return delays


# --- quality metrics ----------------------------------------------------------

EVAL_MATCH_RADIUS_M = 0.5


@dataclass
class TrackingReport:
    frames: int = 0
    matches: int = 0
    id_switches: int = 0
    misses: int = 0
    false_tracks: int = 0
    translation_error_sum: float = 0.0

    @property
    def translation_error_mean(self) -> float:
        return self.translation_error_sum / self.matches if self.matches else 0.0

    def lines(self) -> list[str]:
        return [
            f"frames {self.frames}",
            f"matches {self.matches}",
            f"id_switches {self.id_switches}",
            f"misses {self.misses}",
            f"false_tracks {self.false_tracks}",
            f"translation_error_mean_m {self.translation_error_mean:.6f}",
        ]


def evaluate_tracking(
    truth: list[list[tuple[int, Detection]]],
    emitted: list[list[tuple[int, Detection]]],
) -> TrackingReport:
    """Score emitted tracks against ground truth, frame by frame.

    Emitted tracks match ground-truth persons by nearest translation within
    0.5 m; an id switch is any change in a person's track-id mapping.
    """
    if len(truth) != len(emitted):
        raise ValueError(f"frame count mismatch: truth {len(truth)} vs emitted {len(emitted)}")
    report = TrackingReport(frames=len(truth))
    last_track: dict[int, int] = {}

    for truth_frame, emitted_frame in zip(truth, emitted):
        if not truth_frame and not emitted_frame:
            continue
        if not emitted_frame:
            report.misses += len(truth_frame)
            continue
        if not truth_frame:
            report.false_tracks += len(emitted_frame)
            continue
        gt_pos = np.array([det.translation for _, det in truth_frame])
        em_pos = np.array([det.translation for _, det in emitted_frame])
        dist = np.linalg.norm(gt_pos[:, None, :] - em_pos[None, :, :], axis=2)
        rows, cols = linear_sum_assignment(dist)
        matched_gt, matched_em = set(), set()
        for r, c in zip(rows, cols):
            if dist[r, c] > EVAL_MATCH_RADIUS_M:
                continue
            person = truth_frame[r][0]
            track_id = emitted_frame[c][0]
            if person in last_track and last_track[person] != track_id:
                report.id_switches += 1
            last_track[person] = track_id
            report.matches += 1
            report.translation_error_sum += float(dist[r, c])
            matched_gt.add(r)
            matched_em.add(c)
        report.misses += len(truth_frame) - len(matched_gt)
        report.false_tracks += len(emitted_frame) - len(matched_em)
    return report


@dataclass(frozen=True)
class JitterReport:
    orient: float
    pose: float
    translation: float


def jitter_metric(frames: list[MotionFrame]) -> JitterReport:
    """Per-group mean squared acceleration via midpoint second differences.

    Requires at least 3 frames at a uniform rate. Acceleration per channel is
    the deviation of each sample from its neighbors' midpoint, scaled by the
    squared rate.
    """
    if len(frames) < 3:
        raise ValueError(f"jitter metric needs >= 3 frames, got {len(frames)}")
    ts = np.array([f.timestamp for f in frames])
    dts = np.diff(ts)
    if np.any(dts <= 0) or not np.allclose(dts, dts[0], rtol=1e-6, atol=1e-12):
        raise ValueError("jitter metric requires a uniform frame rate")
    rate = 1.0 / dts[0]

    x = np.stack([f.channels() for f in frames])          # (T, 75)
    accel = 0.5 * (x[2:] - 2.0 * x[1:-1] + x[:-2]) * rate**2
    sq = accel**2
    return JitterReport(
        orient=float(sq[:, 0:3].mean()),
        pose=float(sq[:, 3:72].mean()),
        translation=float(sq[:, 72:75].mean()),
    )


# --- scenario spec parsing (key/value mappings from config or spec files) -----

_SCENARIO_KEYS = {
    "person_count",
    "duration",
    "rate",
    "paths",
    "gait_amplitude",
    "gait_freq",
    "noise_sigma_trans",
    "noise_sigma_pose",
    "dropout_prob",
    "confidence_mean",
    "confidence_sigma",
    "seed",
    "camera_id",
    "room",
}


def _parse_triple(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ScenarioError(f"expected x,y,z triple, got {text!r}")
    return (parts[0], parts[1], parts[2])


def parse_path(text: str) -> Path:
    """Parse one path spec: 'linear sx,sy,sz vx,vy,vz [phase]' or
    'circular cx,cy,cz radius freq [phase]'."""
    parts = text.split()
    if not parts:
        raise ScenarioError("empty path spec")
    kind = parts[0].lower()
    try:
        if kind == "linear":
            phase = float(parts[3]) if len(parts) > 3 else 0.0
            return LinearPath(start=_parse_triple(parts[1]), velocity=_parse_triple(parts[2]), phase=phase)
        if kind == "circular":
            phase = float(parts[4]) if len(parts) > 4 else 0.0
            return CircularPath(
                center=_parse_triple(parts[1]), radius=float(parts[2]), freq=float(parts[3]), phase=phase
            )
    except (IndexError, ValueError) as e:
        raise ScenarioError(f"bad path spec {text!r}: {e}") from None
    raise ScenarioError(f"unknown path kind {kind!r}")


def scenario_from_mapping(mapping: dict[str, str]) -> ScenarioSpec:
    """Build a ScenarioSpec from string key/value pairs (config section or
    standalone spec file)."""
    unknown = set(mapping) - _SCENARIO_KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    kwargs = {}
    conv = {
        "person_count": int,
        "duration": float,
        "rate": float,
        "gait_amplitude": float,
        "gait_freq": float,
        "noise_sigma_trans": float,
        "noise_sigma_pose": float,
        "dropout_prob": float,
        "confidence_mean": float,
        "confidence_sigma": float,
        "seed": int,
        "camera_id": str,
    }
    for key, fn in conv.items():
        if key in mapping:
            try:
                kwargs[key] = fn(mapping[key])
            except ValueError as e:
                raise ScenarioError(f"scenario key {key}: {e}") from None
    if "paths" in mapping and mapping["paths"].strip():
        kwargs["paths"] = tuple(parse_path(p) for p in mapping["paths"].split(";") if p.strip())
    return ScenarioSpec(**kwargs)


def scenario_to_mapping(spec: ScenarioSpec) -> dict[str, str]:
    out = {
        "person_count": str(spec.person_count),
        "duration": repr(spec.duration),
        "rate": repr(spec.rate),
        "gait_amplitude": repr(spec.gait_amplitude),
        "gait_freq": repr(spec.gait_freq),
        "noise_sigma_trans": repr(spec.noise_sigma_trans),
        "noise_sigma_pose": repr(spec.noise_sigma_pose),
        "dropout_prob": repr(spec.dropout_prob),
        "confidence_mean": repr(spec.confidence_mean),
        "confidence_sigma": repr(spec.confidence_sigma),
        "seed": str(spec.seed),
        "camera_id": spec.camera_id,
    }
    if spec.paths:
        parts = []
        for p in spec.paths:
            if isinstance(p, LinearPath):
                parts.append(
                    "linear %s %s %r" % (",".join(map(repr, p.start)), ",".join(map(repr, p.velocity)), p.phase)
                )
            else:
                parts.append(
                    "circular %s %r %r %r" % (",".join(map(repr, p.center)), p.radius, p.freq, p.phase)
                )
        out["paths"] = "; ".join(parts)
    return out
