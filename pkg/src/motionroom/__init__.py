"""Room-based real-time motion streaming: 3D tracking, smoothing, FK, fan-out."""

from .core import (
    CameraIntrinsics,
    Detection,
    DetectionRejected,
    MotionFrame,
    ObsUVZS,
    ReplayLineError,
    detection_from_line,
    detection_to_line,
    project_translation,
    unproject_obs,
)
from .kinematics import (
    JOINT_COUNT,
    Skeleton,
    SkeletonError,
    SkeletonPose,
    axis_angle_to_matrix,
    default_skeleton,
    forward_kinematics,
    load_skeleton,
)
from .smoothing import OneEuroFilter, OneEuroParams, SmoothingBank, SmoothingParams
from .tracking import Tracker, TrackerConfig, TrackStatus
from .sources import (
    ScenarioSpec,
    evaluate_tracking,
    generate,
    jitter_metric,
    load_replay,
    named_scenarios,
)
from .pipeline import CameraPipeline
from .rooms import AvatarDescriptor, FrameBatch, RoomService
from .config import ConfigError, ServerConfig, dump_config, load_config, parse_config
from .server import MotionServer
from .client import RoomClient

__version__ = "0.1.0"

__all__ = [
    "AvatarDescriptor",
    "CameraIntrinsics",
    "CameraPipeline",
    "ConfigError",
    "Detection",
    "DetectionRejected",
    "FrameBatch",
    "JOINT_COUNT",
    "MotionFrame",
    "MotionServer",
    "ObsUVZS",
    "OneEuroFilter",
    "OneEuroParams",
    "ReplayLineError",
    "RoomClient",
    "RoomService",
    "ScenarioSpec",
    "ServerConfig",
    "Skeleton",
    "SkeletonError",
    "SkeletonPose",
    "SmoothingBank",
    "SmoothingParams",
    "TrackStatus",
    "Tracker",
    "TrackerConfig",
    "axis_angle_to_matrix",
    "default_skeleton",
    "detection_from_line",
    "detection_to_line",
    "dump_config",
    "evaluate_tracking",
    "forward_kinematics",
    "generate",
    "jitter_metric",
    "load_config",
    "load_replay",
    "load_skeleton",
    "named_scenarios",
    "parse_config",
    "project_translation",
    "unproject_obs",
    "__version__",
]
