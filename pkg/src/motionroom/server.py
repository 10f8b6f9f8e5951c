"""Asyncio network front-end tying sources, pipelines and rooms together.

Two transports speak the same record protocol: raw TCP with length-prefixed
frames, and optionally WebSocket where each binary message is one record.
Everything runs on one event loop; per-room and per-camera state is therefore
mutated strictly sequentially.
"""

from __future__ import annotations

import asyncio
import dataclasses
import logging
import os
import signal
import time
import uuid

from .config import ServerConfig
from .core import Detection, ReplayLineError, detection_from_dict, detection_to_line
from .metrics import MetricsRegistry
from .pipeline import CameraPipeline
from .protocol import ProtocolError, decode_record, encode_record, pack_frame, read_message, require
from .rooms import AvatarDescriptor, Participant, RoomError, RoomService
from .sources import ScenarioError, ScenarioSpec, generate, named_scenarios

log = logging.getLogger("motionroom.server")


class TcpTransport:
    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer

    async def recv_record(self) -> dict | None:
        return await read_message(self.reader)

    async def send(self, record_bytes: bytes) -> None:
        self.writer.write(pack_frame(record_bytes))
        await self.writer.drain()

    async def close(self) -> None:
        try:
            self.writer.close()
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass


class WsTransport:
    def __init__(self, ws):
        self.ws = ws

    async def recv_record(self) -> dict | None:
        import websockets.exceptions

        try:
            msg = await self.ws.recv()
        except websockets.exceptions.ConnectionClosed:
            return None
        if isinstance(msg, str):
            msg = msg.encode("utf-8")
        return decode_record(msg)

    async def send(self, record_bytes: bytes) -> None:
        await self.ws.send(record_bytes)

    async def close(self) -> None:
        await self.ws.close()


class InternalSource:
    """A scenario generator the server runs on behalf of one participant."""

    def __init__(self, name: str, spec: ScenarioSpec, room_id: str, camera_id: str, participant_id: str):
        self.name = name
        self.spec = spec
        self.room_id = room_id
        self.camera_id = camera_id
        self.participant_id = participant_id
        self.speed = 1.0
        self.paused = False
        self.pending_spec: ScenarioSpec | None = None
        self.task: asyncio.Task | None = None


class RoomRecorder:
    def __init__(self, room_id: str, path: str):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8")
        self._fh.write(f"# motionroom recording room={room_id}\n")
        self._fh.flush()

    def write_frame(self, detections: list[Detection]) -> None:
        for det in detections:
            self._fh.write(detection_to_line(det) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


class MotionServer:
    def __init__(self, cfg: ServerConfig | None = None, registry: MetricsRegistry | None = None):
        self.cfg = cfg or ServerConfig()
        self.registry = registry or MetricsRegistry()
        s = self.cfg.server
        self.service = RoomService(
            tick_rate=s.tick_rate,
            stale_evict_ms=s.stale_evict_ms,
            queue_depth=s.queue_depth,
            registry=self.registry,
        )
        self.pipelines: dict[tuple[str, str], CameraPipeline] = {}
        self._tickers: dict[str, asyncio.Task] = {}
        self._recorders: dict[str, RoomRecorder] = {}
        self._sources: dict[str, InternalSource] = {}      # participant_id -> source
        self._pending_pongs: dict[tuple[str, int], tuple[asyncio.Future, float]] = {}
        self._sessions: set[asyncio.Task] = set()
        self._tcp_server: asyncio.AbstractServer | None = None
        self._ws_server = None
        self._metrics_server: asyncio.AbstractServer | None = None
        self._signal_installed = False

    # -- lifecycle --------------------------------------------------------------

    async def start(self) -> None:
        s = self.cfg.server
        self._tcp_server = await asyncio.start_server(self._on_tcp, s.host, s.port)
        if s.ws_port:
            import websockets

            self._ws_server = await websockets.serve(self._on_ws, s.host, s.ws_port)
        if s.metrics_port:
            self._metrics_server = await asyncio.start_server(self._on_metrics, s.host, s.metrics_port)
        try:
            asyncio.get_running_loop().add_signal_handler(signal.SIGUSR1, self.log_metrics)
            self._signal_installed = True
        except (NotImplementedError, ValueError, RuntimeError):
            pass

        for src_cfg in self.cfg.scenarios:
            participant = self.service.join(
                src_cfg.room,
                display_name=f"synth:{src_cfg.name}",
                avatar=AvatarDescriptor(),
                camera_id=src_cfg.spec.camera_id,
            )
            self._ensure_room_running(src_cfg.room)
            self._start_source(src_cfg.name, src_cfg.spec, src_cfg.room, participant.participant_id)
        log.info("listening on %s:%d (tcp)%s", s.host, self.port, f" ws:{self.ws_port}" if s.ws_port else "")

    @property
    def port(self) -> int:
        return self._tcp_server.sockets[0].getsockname()[1]

    @property
    def ws_port(self) -> int:
        if self._ws_server is None:
            return 0
        return next(iter(self._ws_server.sockets)).getsockname()[1]

    @property
    def metrics_port(self) -> int:
        if self._metrics_server is None:
            return 0
        return self._metrics_server.sockets[0].getsockname()[1]

    async def stop(self) -> None:
        if self._signal_installed:
            asyncio.get_running_loop().remove_signal_handler(signal.SIGUSR1)
        tasks = list(self._tickers.values()) + [s.task for s in self._sources.values() if s.task]
        tasks += list(self._sessions)
        for task in tasks:
            task.cancel()
        await asyncio.gather(*tasks, return_exceptions=True)
        for server in (self._tcp_server, self._metrics_server):
            if server is not None:
                server.close()
                await server.wait_closed()
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()
        for recorder in self._recorders.values():
            recorder.close()
        self._recorders.clear()

    async def serve_forever(self) -> None:
        await self._tcp_server.serve_forever()

    # -- shared ingestion path ----------------------------------------------------

    def _pipeline_for(self, room_id: str, camera_id: str) -> CameraPipeline:
        key = (room_id, camera_id)
        pipeline = self.pipelines.get(key)
        if pipeline is None:
            pipeline = CameraPipeline(
                camera_id=f"{room_id}/{camera_id}",
                intrinsics=self.cfg.camera,
                tracker_cfg=self.cfg.tracker,
                smoothing=self.cfg.smoothing,
                registry=self.registry,
            )
            self.pipelines[key] = pipeline
        return pipeline

    def ingest_detections(
        self,
        room_id: str,
        camera_id: str,
        detections: list[Detection],
        t: float | None = None,
        origin_ts: float | None = None,
    ) -> None:
        """Raw detections -> tracker -> smoothing -> room snapshot."""
        origin = time.monotonic() if origin_ts is None else origin_ts
        recorder = self._recorders.get(room_id)
        if recorder is not None and detections:
            recorder.write_frame(detections)
        pipeline = self._pipeline_for(room_id, camera_id)
        frames = pipeline.process(detections, t)
        self.service.ingest(room_id, camera_id, frames, origin_ts=origin)

    def _ensure_room_running(self, room_id: str) -> None:
        if room_id not in self._tickers:
            self._tickers[room_id] = asyncio.create_task(self._ticker(room_id), name=f"tick:{room_id}")
        if self.cfg.record.dir and room_id not in self._recorders:
            os.makedirs(self.cfg.record.dir, exist_ok=True)
            path = os.path.join(self.cfg.record.dir, f"{room_id}.jsonl")
            self._recorders[room_id] = RoomRecorder(room_id, path)

    async def _ticker(self, room_id: str) -> None:
        interval = 1.0 / self.service.tick_rate
        loop = asyncio.get_running_loop()
        next_t = loop.time() + interval
        while True:
            delay = next_t - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            self.service.tick_room(room_id)
            next_t += interval
            if next_t < loop.time() - 5 * interval:   # fell far behind: resync, don't burst
                next_t = loop.time() + interval

    # -- internal sources -----------------------------------------------------------

    def _scenario_by_name(self, name: str) -> ScenarioSpec:
        for src in self.cfg.scenarios:
            if src.name == name:
                return src.spec
        canned = named_scenarios()
        if name in canned:
            return canned[name]
        raise RoomError(f"unknown scenario {name!r}")

    def _start_source(self, name: str, spec: ScenarioSpec, room_id: str, participant_id: str) -> InternalSource:
        src = InternalSource(name, spec, room_id, spec.camera_id, participant_id)
        src.task = asyncio.create_task(self._run_source(src), name=f"source:{name}")
        self._sources[participant_id] = src
        return src

    async def _run_source(self, src: InternalSource) -> None:
        t_base = 0.0
        interval_floor = 1e-3
        while True:
            spec = dataclasses.replace(src.spec, camera_id=src.camera_id)
            result = generate(spec)
            interval = 1.0 / spec.rate
            last_t = t_base
            for k, dets in enumerate(result.frames):
                while src.paused:
                    await asyncio.sleep(0.05)
                if src.pending_spec is not None:
                    break
                t = t_base + k / spec.rate
                shifted = [dataclasses.replace(d, timestamp=t) for d in dets]
                self.ingest_detections(src.room_id, src.camera_id, shifted, t=t)
                last_t = t
                await asyncio.sleep(max(interval / src.speed, interval_floor))
            if src.pending_spec is not None:
                src.spec = src.pending_spec
                src.pending_spec = None
            t_base = last_t + interval

    def _apply_ctrl(self, src: InternalSource, action: str, value) -> None:
        if action == "pause":
            src.paused = True
        elif action == "resume":
            src.paused = False
        elif action == "speed":
            try:
                v = float(value)
            except (TypeError, ValueError):
                raise RoomError(f"speed must be a number, got {value!r}") from None
            if not (0.0 < v <= 16.0):
                raise RoomError(f"speed must be in (0, 16], got {v}")
            src.speed = v
        elif action == "scenario":
            if not isinstance(value, str):
                raise RoomError("scenario control needs a name")
            src.pending_spec = self._scenario_by_name(value)
        else:
            raise RoomError(f"unknown control action {action!r}")

    # -- connection handling -----------------------------------------------------------

    async def _on_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        transport = TcpTransport(reader, writer)
        task = asyncio.current_task()
        self._sessions.add(task)
        try:
            await self._handle_session(transport)
        except (ProtocolError, ConnectionError, OSError) as e:
            log.warning("session ended: %s", e)
        finally:
            self._sessions.discard(task)
            await transport.close()

    async def _on_ws(self, ws) -> None:
        transport = WsTransport(ws)
        task = asyncio.current_task()
        self._sessions.add(task)
        try:
            await self._handle_session(transport)
        except (ProtocolError, ConnectionError, OSError) as e:
            log.warning("ws session ended: %s", e)
        finally:
            self._sessions.discard(task)
            await transport.close()

    async def _handle_session(self, transport) -> None:
        # pre-join phase: answer pings, wait for JOIN
        while True:
            rec = await transport.recv_record()
            if rec is None or rec["tag"] == "LEAVE":
                return
            if rec["tag"] == "PING":
                await transport.send(
                    encode_record({"tag": "PONG", "nonce": rec.get("nonce", 0), "t": rec.get("t", 0.0)})
                )
                continue
            if rec["tag"] == "JOIN":
                break
            raise ProtocolError(f"expected JOIN before {rec['tag']}")

        room_id = require(rec, "room", str)
        name = require(rec, "name", str)
        camera_id = rec.get("camera_id") or ""
        source_req = rec.get("source")
        if source_req is not None and not isinstance(source_req, dict):
            await transport.send(encode_record({"tag": "JOIN_ERR", "reason": "source must be an object"}))
            return
        if source_req and not camera_id:
            camera_id = f"src-{uuid.uuid4().hex[:8]}"

        try:
            avatar = AvatarDescriptor.from_dict(rec.get("avatar") or {})
            participant = self.service.join(room_id, name, avatar, camera_id)
        except RoomError as e:
            await transport.send(encode_record({"tag": "JOIN_ERR", "reason": str(e)}))
            return

        source = None
        if source_req:
            try:
                spec = self._scenario_by_name(require_str(source_req, "scenario"))
                source = self._start_source(
                    f"client:{participant.participant_id}",
                    dataclasses.replace(spec, camera_id=camera_id),
                    room_id,
                    participant.participant_id,
                )
            except (RoomError, ScenarioError, ProtocolError) as e:
                self.service.leave(room_id, participant.participant_id)
                await transport.send(encode_record({"tag": "JOIN_ERR", "reason": str(e)}))
                return

        self._ensure_room_running(room_id)
        room = self.service.rooms[room_id]
        await transport.send(
            encode_record(
                {
                    "tag": "JOIN_OK",
                    "participant_id": participant.participant_id,
                    "room": room_id,
                    "tick": room.current_tick,
                    "tick_rate": room.tick_rate,
                    "roster": room.roster_record()["participants"],
                }
            )
        )

        writer_task = asyncio.create_task(self._writer(transport, participant))
        pinger_task = asyncio.create_task(self._pinger(participant))
        try:
            while True:
                rec = await transport.recv_record()
                if rec is None or rec["tag"] == "LEAVE":
                    break
                self._dispatch(rec, participant, room_id, source)
        finally:
            pinger_task.cancel()
            writer_task.cancel()
            await asyncio.gather(writer_task, pinger_task, return_exceptions=True)
            if source is not None and source.task is not None:
                source.task.cancel()
                await asyncio.gather(source.task, return_exceptions=True)
                self._sources.pop(participant.participant_id, None)
            self.service.leave(room_id, participant.participant_id)

    def _dispatch(self, rec: dict, participant: Participant, room_id: str, source: InternalSource | None) -> None:
        tag = rec["tag"]
        if tag == "PING":
            participant.outbox.put_control(
                encode_record({"tag": "PONG", "nonce": rec.get("nonce", 0), "t": rec.get("t", 0.0)})
            )
        elif tag == "PONG":
            nonce = rec.get("nonce")
            if not isinstance(nonce, int):
                return
            key = (participant.participant_id, nonce)
            pending = self._pending_pongs.pop(key, None)
            if pending is not None:
                fut, sent_at = pending
                participant.observe_rtt((time.monotonic() - sent_at) * 1000.0)
                if not fut.done():
                    fut.set_result(None)
        elif tag == "INGEST":
            self._handle_ingest(rec, participant, room_id)
        elif tag == "CTRL":
            nonce = rec.get("nonce", 0)
            if source is None:
                reply = {"tag": "CTRL_ERR", "nonce": nonce, "reason": "no source attached"}
            else:
                try:
                    self._apply_ctrl(source, str(rec.get("action")), rec.get("value"))
                    reply = {"tag": "CTRL_OK", "nonce": nonce}
                except RoomError as e:
                    reply = {"tag": "CTRL_ERR", "nonce": nonce, "reason": str(e)}
            participant.outbox.put_control(encode_record(reply))
        else:
            log.debug("ignoring %s from %s", tag, participant.participant_id)

    def _handle_ingest(self, rec: dict, participant: Participant, room_id: str) -> None:
        origin = time.monotonic()
        camera_id = rec.get("camera_id") or ""
        if not participant.camera_id or camera_id != participant.camera_id:
            self.registry.counter(f"room.{room_id}.ingest_dropped").inc(
                len(rec.get("detections") or [])
            )
            return
        detections = []
        rejected = 0
        for item in rec.get("detections") or []:
            try:
                detections.append(detection_from_dict(item))
            except ReplayLineError:
                rejected += 1
        if rejected:
            self.registry.counter(f"room.{room_id}.ingest_rejected").inc(rejected)
        t = rec.get("t")
        if t is None and detections:
            t = detections[0].timestamp
        if detections or t is not None:
            self.ingest_detections(room_id, camera_id, detections, t=t, origin_ts=origin)

    async def _writer(self, transport, participant: Participant) -> None:
        try:
            while True:
                payload = await participant.outbox.get()
                if payload is None:
                    return
                await transport.send(payload)
        except (ConnectionError, OSError):
            return

    async def _pinger(self, participant: Participant) -> None:
        s = self.cfg.server
        nonce = 0
        loop = asyncio.get_running_loop()
        while True:
            await asyncio.sleep(s.ping_interval)
            nonce += 1
            key = (participant.participant_id, nonce)
            fut = loop.create_future()
            self._pending_pongs[key] = (fut, time.monotonic())
            participant.outbox.put_control(
                encode_record({"tag": "PING", "nonce": nonce, "t": time.monotonic()})
            )
            try:
                await asyncio.wait_for(fut, timeout=s.pong_timeout)
            except asyncio.TimeoutError:
                participant.healthy = False
            finally:
                self._pending_pongs.pop(key, None)

    # -- metrics -------------------------------------------------------------------

    def render_metrics(self) -> str:
        self.service.export_metrics()
        return self.registry.render()

    def log_metrics(self) -> None:
        log.info("metrics dump\n%s", self.render_metrics())

    async def _on_metrics(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            writer.write(self.render_metrics().encode("utf-8"))
            await writer.drain()
        finally:
            writer.close()


def require_str(rec: dict, key: str) -> str:
    value = rec.get(key)
    if not isinstance(value, str):
        raise ProtocolError(f"field {key!r} must be a string")
    return value
