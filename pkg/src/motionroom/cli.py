"""Command-line entry points: serve, synth, replay, bench, record."""

from __future__ import annotations

import argparse
import asyncio
import dataclasses
import logging
import sys

from .bench import run_bench_report
from .client import JoinRejected, RoomClient
from .config import ConfigError, ServerConfig, load_config
from .core import Detection, detection_to_line
from .server import MotionServer
from .sources import (
    ScenarioError,
    ScenarioSpec,
    generate,
    load_replay,
    named_scenarios,
    replay_delays,
    scenario_from_mapping,
)

log = logging.getLogger("motionroom.cli")


def _load_scenario_file(path: str) -> ScenarioSpec:
    """Standalone scenario spec: key = value lines, same keys as config sections."""
    mapping: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#") or line.startswith(";"):
                continue
            if "=" not in line:
                raise ScenarioError(f"{path}:{lineno}: expected key = value")
            key, _, value = line.partition("=")
            mapping[key.strip().lower()] = value.strip()
    mapping.pop("room", None)
    return scenario_from_mapping(mapping)


def _resolve_spec(args) -> ScenarioSpec:
    if getattr(args, "spec", None):
        spec = _load_scenario_file(args.spec)
    else:
        canned = named_scenarios()
        if args.scenario not in canned:
            raise ScenarioError(f"unknown scenario {args.scenario!r}; known: {sorted(canned)}")
        spec = canned[args.scenario]
    if getattr(args, "seed", None) is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    if getattr(args, "duration", None) is not None:
        spec = dataclasses.replace(spec, duration=args.duration)
    return spec


# --- serve ---------------------------------------------------------------------


def _build_config(args) -> ServerConfig:
    cfg = load_config(args.config) if args.config else ServerConfig()
    server = cfg.server
    overrides = {}
    for flag, key in (
        ("host", "host"),
        ("port", "port"),
        ("ws_port", "ws_port"),
        ("metrics_port", "metrics_port"),
        ("tick_rate", "tick_rate"),
    ):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    if overrides:
        server = dataclasses.replace(server, **overrides)
        cfg = dataclasses.replace(cfg, server=server)
    if args.record_dir is not None:
        cfg = dataclasses.replace(cfg, record=dataclasses.replace(cfg.record, dir=args.record_dir))
    return cfg


async def _serve(cfg: ServerConfig) -> None:
    server = MotionServer(cfg)
    await server.start()
    try:
        await server.serve_forever()
    except asyncio.CancelledError:
        pass
    finally:
        await server.stop()


def cmd_serve(args) -> int:
    try:
        cfg = _build_config(args)
    except (ConfigError, ScenarioError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        asyncio.run(_serve(cfg))
    except OSError as e:
        print(f"cannot start server: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        pass
    return 0


# --- synth ---------------------------------------------------------------------


async def _stream_frames(
    client: RoomClient, frames: list[list[Detection]], delays: list[float], times: list[float | None]
) -> None:
    for dets, delay, t in zip(frames, delays, times):
        if delay > 0:
            await asyncio.sleep(delay)
        await client.ingest(dets, t=t)


async def _synth(args, spec: ScenarioSpec) -> None:
    client = RoomClient(args.host, args.port)
    await client.connect()
    try:
        await client.join(args.room, name=args.name, camera_id=spec.camera_id)
        result = generate(spec)
        interval = 1.0 / spec.rate
        if args.speed > 0:
            delays = [0.0] + [interval / args.speed] * (len(result.frames) - 1)
        else:
            delays = [0.0] * len(result.frames)
        times = [k / spec.rate for k in range(len(result.frames))]
        await _stream_frames(client, result.frames, delays, times)
        await client.ping()   # records are handled in order: pong back means all frames landed
        log.info("streamed %d frames into room %s", len(result.frames), args.room)
    finally:
        await client.close()


def cmd_synth(args) -> int:
    try:
        spec = _resolve_spec(args)
    except (ScenarioError, OSError) as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return 2
    try:
        asyncio.run(_synth(args, spec))
    except (ConnectionError, OSError) as e:
        print(f"cannot reach server: {e}", file=sys.stderr)
        return 1
    except JoinRejected as e:
        print(f"join rejected: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        pass
    return 0


# --- replay --------------------------------------------------------------------


async def _replay(args) -> None:
    data = load_replay(args.file)
    if data.skipped_lines:
        log.warning("skipped %d malformed lines in %s", data.skipped_lines, args.file)

    by_camera: dict[str, list[list[Detection]]] = {}
    for frame in data.frames:
        if frame:
            by_camera.setdefault(frame[0].camera_id, []).append(frame)

    async def run_camera(camera_id: str, frames: list[list[Detection]]) -> None:
        client = RoomClient(args.host, args.port)
        await client.connect()
        try:
            await client.join(args.room, name=f"replay:{camera_id}", camera_id=camera_id)
            delays = replay_delays(frames, args.speed)
            times = [frame[0].timestamp if frame else None for frame in frames]
            await _stream_frames(client, frames, delays, times)
            await client.ping()   # records are handled in order: pong back means all frames landed
        finally:
            await client.close()

    await asyncio.gather(*(run_camera(cam, frames) for cam, frames in by_camera.items()))
    log.info("replayed %d cameras, %d frames", len(by_camera), len(data.frames))


def cmd_replay(args) -> int:
    try:
        asyncio.run(_replay(args))
    except OSError as e:
        print(f"replay failed: {e}", file=sys.stderr)
        return 2
    except JoinRejected as e:
        print(f"join rejected: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        pass
    return 0


# --- bench ---------------------------------------------------------------------


def cmd_bench(args) -> int:
    paths, compute, loopback = run_bench_report(
        out_dir=args.out,
        cameras=args.cameras,
        persons=args.persons,
        duration=args.duration,
        rate=args.rate,
        seed=args.seed,
        loopback=not args.no_loopback,
    )
    for key, value in compute.rows():
        print(f"compute.{key} {value}")
    if loopback is not None:
        for key, value in loopback.rows():
            print(f"loopback.{key} {value}")
    for label, path in paths.items():
        print(f"wrote.{label} {path}")
    return 0


# --- record --------------------------------------------------------------------


def cmd_record(args) -> int:
    try:
        spec = _resolve_spec(args)
    except (ScenarioError, OSError) as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return 2
    result = generate(spec)
    try:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(f"# motionroom recording scenario seed={spec.seed} rate={spec.rate}\n")
            count = 0
            for frame in result.frames:
                for det in frame:
                    fh.write(detection_to_line(det) + "\n")
                    count += 1
    except OSError as e:
        print(f"cannot write {args.out}: {e}", file=sys.stderr)
        return 2
    print(f"wrote {count} detections over {len(result.frames)} frames to {args.out}")
    return 0


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motionroom",
        description="Room-based real-time motion streaming service and tools.",
    )
    parser.add_argument("--log-level", default="info", choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the motion room server")
    p.add_argument("--config", help="INI config file")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--ws-port", type=int, default=None, dest="ws_port")
    p.add_argument("--metrics-port", type=int, default=None, dest="metrics_port")
    p.add_argument("--tick-rate", type=float, default=None, dest="tick_rate")
    p.add_argument("--record-dir", default=None, dest="record_dir")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("synth", help="stream a synthetic scenario into a room")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7430)
    p.add_argument("--room", default="lobby")
    p.add_argument("--scenario", default="default")
    p.add_argument("--spec", help="standalone scenario spec file (key = value)")
    p.add_argument("--name", default="synth")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--speed", type=float, default=1.0, help="pacing multiplier; 0 = as fast as possible")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("replay", help="stream a recorded detection file into a room")
    p.add_argument("file")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7430)
    p.add_argument("--room", default="lobby")
    p.add_argument("--speed", type=float, default=1.0, help="pacing multiplier; 0 = as fast as possible")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("bench", help="run compute and loopback benches, write CSV + figures")
    p.add_argument("--cameras", type=int, default=4)
    p.add_argument("--persons", type=int, default=2)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--rate", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", default="bench_report")
    p.add_argument("--no-loopback", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("record", help="write a scenario to a replay file")
    p.add_argument("--scenario", default="default")
    p.add_argument("--spec", help="standalone scenario spec file (key = value)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_record)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
