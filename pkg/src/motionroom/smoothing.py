"""Adaptive low-pass smoothing of motion channels.

Each tracked person owns a bank of three filter groups (orientation, body
pose, translation); every scalar channel is filtered independently by the
classic speed-adaptive one-euro recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import MotionFrame

TWO_PI = 2.0 * math.pi


class OutOfOrderSample(ValueError):
    """Sample timestamp does not advance the filter clock."""


@dataclass(frozen=True)
class OneEuroParams:
    min_cutoff: float = 1.0   # Hz
    beta: float = 0.0
    d_cutoff: float = 1.0     # Hz

    def __post_init__(self):
        if self.min_cutoff <= 0 or self.d_cutoff <= 0:
            raise ValueError("cutoff frequencies must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass(frozen=True)
class SmoothingParams:
    """Per-group filter parameters; defaults tuned for 30 Hz motion streams."""

    orient: OneEuroParams = OneEuroParams(min_cutoff=1.0, beta=0.3, d_cutoff=1.0)
    pose: OneEuroParams = OneEuroParams(min_cutoff=1.0, beta=0.3, d_cutoff=1.0)
    translation: OneEuroParams = OneEuroParams(min_cutoff=0.5, beta=0.5, d_cutoff=1.0)


def smoothing_factor(cutoff, dt):
    """Low-pass blend factor alpha = 1 / (1 + tau/dt) with tau = 1/(2*pi*cutoff).

    Accepts scalars or arrays for ``cutoff``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if np.any(np.asarray(cutoff) <= 0):
        raise ValueError("cutoff must be > 0")
    tau = 1.0 / (TWO_PI * np.asarray(cutoff, dtype=np.float64))
    return 1.0 / (1.0 + tau / dt)


class OneEuroFilter:
    """One-euro recurrence over ``n`` independent scalar channels.

    State per channel: last filtered value, last filtered derivative and the
    shared sample clock. The first sample passes through unchanged.
    """

    def __init__(self, n: int, params: OneEuroParams):
        self.params = params
        self.n = n
        self.initialized = False
        self.x_hat = np.zeros(n)
        self.dx_hat = np.zeros(n)
        self.last_t = 0.0

    def update(self, x, t: float) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(self.n)
        if not self.initialized:
            self.x_hat = x.copy()
            self.dx_hat = np.zeros(self.n)
            self.last_t = t
            self.initialized = True
            return self.x_hat.copy()
        if t <= self.last_t:
            raise OutOfOrderSample(f"t={t} does not advance filter clock {self.last_t}")
        dt = t - self.last_t
        p = self.params
        dx = (x - self.x_hat) / dt
        a_d = smoothing_factor(p.d_cutoff, dt)
        # increment form of the low-pass lerp: exactly idempotent on
        # constant input (a*x + (1-a)*x need not round back to x)
        self.dx_hat = self.dx_hat + a_d * (dx - self.dx_hat)
        cutoff = p.min_cutoff + p.beta * np.abs(self.dx_hat)
        a = smoothing_factor(cutoff, dt)
        self.x_hat = self.x_hat + a * (x - self.x_hat)
        self.last_t = t
        return self.x_hat.copy()


def continuous_axis_angle(r: np.ndarray, prev: np.ndarray) -> np.ndarray:
    """Pick the axis-angle representation of ``r`` closest to ``prev``.

    Axis-angle is 2*pi-ambiguous: r and r*(1 - 2*pi/|r|) encode the same
    rotation. Filtering raw values across that wrap produces huge spurious
    derivatives, so the representation nearer the previous filtered value is
    forwarded instead.
    """
    return continuous_axis_angle_rows(
        np.asarray(r, dtype=np.float64).reshape(1, 3),
        np.asarray(prev, dtype=np.float64).reshape(1, 3),
    )[0]


def continuous_axis_angle_rows(r: np.ndarray, prev: np.ndarray) -> np.ndarray:
    """Row-wise :func:`continuous_axis_angle` for an (n, 3) stack of vectors."""
    theta = np.sqrt(np.einsum("ij,ij->i", r, r))
    safe = np.where(theta > 0.0, theta, 1.0)
    alt = r * (1.0 - TWO_PI / safe)[:, None]
    d_alt = np.einsum("ij,ij->i", alt - prev, alt - prev)
    d_r = np.einsum("ij,ij->i", r - prev, r - prev)
    take_alt = (theta > 0.0) & (d_alt < d_r)
    return np.where(take_alt[:, None], alt, r)


class SmoothingBank:
    """Per-track filter bank: 3 orientation + 69 pose + 3 translation channels."""

    def __init__(self, params: SmoothingParams | None = None):
        params = params or SmoothingParams()
        self.params = params
        self.orient = OneEuroFilter(3, params.orient)
        self.pose = OneEuroFilter(69, params.pose)
        self.translation = OneEuroFilter(3, params.translation)
        self.dropped = 0

    @property
    def last_t(self) -> float:
        return self.orient.last_t

    def smooth(self, frame: MotionFrame) -> MotionFrame | None:
        """Filter one raw sample; returns None (and counts) if out of order."""
        t = frame.timestamp
        if self.orient.initialized and t <= self.last_t:
            self.dropped += 1
            return None

        orient_in = frame.global_orient
        pose_in = frame.body_pose
        if self.orient.initialized:
            orient_in = continuous_axis_angle(orient_in, self.orient.x_hat)
            pose_in = continuous_axis_angle_rows(
                pose_in.reshape(23, 3), self.pose.x_hat.reshape(23, 3)
            ).reshape(69)

        return MotionFrame(
            person_id=frame.person_id,
            camera_id=frame.camera_id,
            timestamp=t,
            global_orient=self.orient.update(orient_in, t),
            body_pose=self.pose.update(pose_in, t),
            translation=self.translation.update(frame.translation, t),
        )
