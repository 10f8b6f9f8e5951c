"""Server configuration: INI parsing, validation, and round-trippable dumps.

Every value is validated before a server starts; errors name the section and
key. ``parse_config(dump_config(cfg))`` yields an equal config.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields

from .core import CameraIntrinsics
from .smoothing import OneEuroParams, SmoothingParams
from .sources import ScenarioError, ScenarioSpec, scenario_from_mapping, scenario_to_mapping
from .tracking import TrackerConfig


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending section and key."""


@dataclass(frozen=True)
class ServerSettings:
    host: str = "127.0.0.1"
    port: int = 7430
    ws_port: int = 0              # 0 disables the WebSocket listener
    metrics_port: int = 0         # 0 disables the metrics dump listener
    tick_rate: float = 30.0
    stale_evict_ms: float = 1000.0
    queue_depth: int = 8
    ping_interval: float = 1.0
    pong_timeout: float = 2.0
    metrics_interval: float = 10.0

    def __post_init__(self):
        # port 0 asks the OS for an ephemeral port (benches, tests)
        for key in ("port", "ws_port", "metrics_port"):
            v = getattr(self, key)
            if not (0 <= v < 65536):
                raise ValueError(f"{key} must be in 0..65535, got {v}")
        if self.tick_rate <= 0:
            raise ValueError(f"tick_rate must be > 0, got {self.tick_rate}")
        if self.stale_evict_ms <= 0:
            raise ValueError(f"stale_evict_ms must be > 0, got {self.stale_evict_ms}")
        if self.queue_depth < 1:
            raise ValueError(f"queue_depth must be >= 1, got {self.queue_depth}")
        if self.ping_interval <= 0 or self.pong_timeout <= 0:
            raise ValueError("ping_interval and pong_timeout must be > 0")
        if self.metrics_interval <= 0:
            raise ValueError(f"metrics_interval must be > 0, got {self.metrics_interval}")


@dataclass(frozen=True)
class RecordSettings:
    dir: str = ""                 # empty disables recording


@dataclass(frozen=True)
class ScenarioSource:
    name: str
    room: str
    spec: ScenarioSpec


@dataclass(frozen=True)
class ServerConfig:
    server: ServerSettings = ServerSettings()
    tracker: TrackerConfig = TrackerConfig()
    smoothing: SmoothingParams = SmoothingParams()
    camera: CameraIntrinsics = CameraIntrinsics()
    scenarios: tuple[ScenarioSource, ...] = ()
    record: RecordSettings = RecordSettings()


_SMOOTHING_GROUPS = ("orient", "pose", "translation")
_SMOOTHING_PARAMS = ("min_cutoff", "beta", "d_cutoff")


def _parse_typed(section: str, items: dict[str, str], spec: dict[str, type]) -> dict:
    unknown = set(items) - set(spec)
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")
    out = {}
    for key, raw in items.items():
        kind = spec[key]
        try:
            if kind is bool:
                lowered = raw.strip().lower()
                if lowered not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(f"expected boolean, got {raw!r}")
                out[key] = lowered in ("true", "1", "yes")
            else:
                out[key] = kind(raw)
        except ValueError as e:
            raise ConfigError(f"[{section}] {key}: {e}") from None
    return out


def _field_types(cls) -> dict[str, type]:
    kinds = {}
    for f in fields(cls):
        kinds[f.name] = {"int": int, "float": float, "str": str, "bool": bool}[f.type]
    return kinds


def parse_config(text: str) -> ServerConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"config syntax: {e}") from None

    known = {"server", "tracker", "smoothing", "camera", "record"}
    scenario_sections = []
    for section in cp.sections():
        if section in known:
            continue
        if section.startswith("scenario "):
            scenario_sections.append(section)
        else:
            raise ConfigError(f"unknown section [{section}]")

    server = ServerSettings()
    if cp.has_section("server"):
        try:
            server = ServerSettings(**_parse_typed("server", dict(cp.items("server")), _field_types(ServerSettings)))
        except ValueError as e:
            raise ConfigError(f"[server] {e}") from None

    tracker = TrackerConfig()
    if cp.has_section("tracker"):
        try:
            tracker = TrackerConfig(**_parse_typed("tracker", dict(cp.items("tracker")), _field_types(TrackerConfig)))
        except ValueError as e:
            raise ConfigError(f"[tracker] {e}") from None

    smoothing = SmoothingParams()
    if cp.has_section("smoothing"):
        keys = {f"{g}_{p}": float for g in _SMOOTHING_GROUPS for p in _SMOOTHING_PARAMS}
        values = _parse_typed("smoothing", dict(cp.items("smoothing")), keys)
        groups = {}
        for g in _SMOOTHING_GROUPS:
            defaults = getattr(SmoothingParams(), g)
            params = {p: values.get(f"{g}_{p}", getattr(defaults, p)) for p in _SMOOTHING_PARAMS}
            try:
                groups[g] = OneEuroParams(**params)
            except ValueError as e:
                raise ConfigError(f"[smoothing] {g}: {e}") from None
        smoothing = SmoothingParams(**groups)

    camera = CameraIntrinsics()
    if cp.has_section("camera"):
        keys = {"focal_px": float, "cx": float, "cy": float, "width": float, "height": float}
        v = _parse_typed("camera", dict(cp.items("camera")), keys)
        base = CameraIntrinsics()
        try:
            camera = CameraIntrinsics(
                focal_px=v.get("focal_px", base.focal_px),
                principal_point=(
                    v.get("cx", base.principal_point[0]),
                    v.get("cy", base.principal_point[1]),
                ),
                image_size=(v.get("width", base.image_size[0]), v.get("height", base.image_size[1])),
            )
        except ValueError as e:
            raise ConfigError(f"[camera] {e}") from None

    record = RecordSettings()
    if cp.has_section("record"):
        v = _parse_typed("record", dict(cp.items("record")), {"dir": str})
        record = RecordSettings(dir=v.get("dir", ""))

    scenarios = []
    seen_cameras = set()
    for section in scenario_sections:
        name = section[len("scenario ") :].strip()
        if not name:
            raise ConfigError("scenario section needs a name: [scenario NAME]")
        items = dict(cp.items(section))
        room = items.pop("room", "lobby")
        if "camera_id" not in items:
            items["camera_id"] = f"synth-{name}"
        try:
            spec = scenario_from_mapping(items)
        except ScenarioError as e:
            raise ConfigError(f"[{section}] {e}") from None
        if spec.camera_id in seen_cameras:
            raise ConfigError(f"[{section}] camera_id: duplicate {spec.camera_id!r}")
        seen_cameras.add(spec.camera_id)
        scenarios.append(ScenarioSource(name=name, room=room, spec=spec))

    return ServerConfig(
        server=server,
        tracker=tracker,
        smoothing=smoothing,
        camera=camera,
        scenarios=tuple(scenarios),
        record=record,
    )


def load_config(path) -> ServerConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(text)


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


def dump_config(cfg: ServerConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)

    cp["server"] = {f.name: _fmt(getattr(cfg.server, f.name)) for f in fields(ServerSettings)}
    cp["tracker"] = {f.name: _fmt(getattr(cfg.tracker, f.name)) for f in fields(TrackerConfig)}
    cp["smoothing"] = {
        f"{g}_{p}": _fmt(getattr(getattr(cfg.smoothing, g), p))
        for g in _SMOOTHING_GROUPS
        for p in _SMOOTHING_PARAMS
    }
    cp["camera"] = {
        "focal_px": _fmt(cfg.camera.focal_px),
        "cx": _fmt(cfg.camera.principal_point[0]),
        "cy": _fmt(cfg.camera.principal_point[1]),
        "width": _fmt(cfg.camera.image_size[0]),
        "height": _fmt(cfg.camera.image_size[1]),
    }
    if cfg.record.dir:
        cp["record"] = {"dir": cfg.record.dir}
    for src in cfg.scenarios:
        body = scenario_to_mapping(src.spec)
        body["room"] = src.room
        cp[f"scenario {src.name}"] = body

    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
