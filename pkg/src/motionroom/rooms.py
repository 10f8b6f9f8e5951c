"""Rooms, rosters, avatars, and tick-synchronized motion fan-out.

All room mutations run on one event loop, so per-room state needs no locks.
A tick snapshots the freshest motion per person, runs forward kinematics once
per entry, serializes a single FRAME_BATCH payload, and hands the identical
bytes to every participant's outbound queue.
"""

from __future__ import annotations

import re
import time
from collections import deque
from dataclasses import dataclass, field

import asyncio

from .core import MotionFrame
from .kinematics import Skeleton, SkeletonError, default_skeleton, forward_kinematics, skeleton_from_rows
from .metrics import MetricsRegistry
from .protocol import BatchEntry, encode_record, frame_batch_record

RTT_EWMA_FACTOR = 0.1


class RoomError(ValueError):
    """Join/ingest rejection; the message is the client-facing reason."""


@dataclass(frozen=True)
class AvatarDescriptor:
    avatar_id: str = "default"
    color: str = "#4ac0ff"
    skeleton: Skeleton | None = None   # optional upload; None means server default

    def to_dict(self) -> dict:
        rows = None
        if self.skeleton is not None:
            rows = [
                {"name": n, "parent": int(p), "offset": [float(x) for x in off]}
                for n, p, off in zip(self.skeleton.joint_names, self.skeleton.parent, self.skeleton.rest_offsets)
            ]
        return {"avatar_id": self.avatar_id, "color": self.color, "skeleton": rows}

    @staticmethod
    def from_dict(rec) -> "AvatarDescriptor":
        if not isinstance(rec, dict):
            raise RoomError("avatar must be an object")
        avatar_id = rec.get("avatar_id", "default")
        color = rec.get("color", "#4ac0ff")
        if not isinstance(avatar_id, str) or not isinstance(color, str):
            raise RoomError("avatar_id and color must be strings")
        if not (len(color) == 7 and color[0] == "#" and all(c in "0123456789abcdefABCDEF" for c in color[1:])):
            raise RoomError(f"avatar color must look like #rrggbb, got {color!r}")
        skeleton = None
        rows = rec.get("skeleton")
        if rows is not None:
            if not isinstance(rows, list):
                raise RoomError("avatar skeleton must be a list of joint rows")
            try:
                skeleton = skeleton_from_rows(rows)
            except SkeletonError as e:
                raise RoomError(f"avatar skeleton invalid: {e}") from None
        return AvatarDescriptor(avatar_id=avatar_id, color=color, skeleton=skeleton)


class Outbox:
    """Per-participant outbound queue: batches drop-oldest, controls never drop."""

    def __init__(self, depth: int):
        if depth < 1:
            raise ValueError(f"queue depth must be >= 1, got {depth}")
        self.depth = depth
        self.dropped = 0
        self.closed = False
        self._items: deque[tuple[bool, bytes]] = deque()   # (is_batch, payload)
        self._wakeup = asyncio.Event()

    def _batch_count(self) -> int:
        return sum(1 for is_batch, _ in self._items if is_batch)

    def put_control(self, payload: bytes) -> None:
        if self.closed:
            return
        self._items.append((False, payload))
        self._wakeup.set()

    def put_batch(self, payload: bytes) -> None:
        if self.closed:
            return
        if self._batch_count() >= self.depth:
            for i, (is_batch, _) in enumerate(self._items):
                if is_batch:
                    del self._items[i]
                    self.dropped += 1
                    break
        self._items.append((True, payload))
        self._wakeup.set()

    async def get(self) -> bytes | None:
        """Next payload in order; None once closed and drained."""
        while not self._items:
            if self.closed:
                return None
            self._wakeup.clear()
            await self._wakeup.wait()
        return self._items.popleft()[1]

    def close(self) -> None:
        self.closed = True
        self._wakeup.set()

    def __len__(self) -> int:
        return len(self._items)


@dataclass
class Participant:
    participant_id: str
    display_name: str
    avatar: AvatarDescriptor
    camera_id: str                  # "" for view-only participants
    outbox: Outbox
    rtt_ms: float = 0.0
    rtt_samples: int = 0
    healthy: bool = True

    def observe_rtt(self, sample_ms: float) -> None:
        if self.rtt_samples == 0:
            self.rtt_ms = sample_ms
        else:
            self.rtt_ms = RTT_EWMA_FACTOR * sample_ms + (1.0 - RTT_EWMA_FACTOR) * self.rtt_ms
        self.rtt_samples += 1
        self.healthy = True

    def roster_entry(self) -> dict:
        return {
            "participant_id": self.participant_id,
            "name": self.display_name,
            "avatar_id": self.avatar.avatar_id,
            "color": self.avatar.color,
            "camera_id": self.camera_id,
        }


@dataclass
class LatestEntry:
    frame: MotionFrame
    receive_ts: float               # server monotonic seconds, post-pipeline
    origin_ts: float                # when the raw detections arrived
    measured: bool = False          # end-to-end latency recorded once per sample


@dataclass
class Room:
    room_id: str
    tick_rate: float
    stale_evict_ms: float
    current_tick: int = 0
    participants: dict[str, Participant] = field(default_factory=dict)
    cameras: dict[str, str] = field(default_factory=dict)            # camera_id -> participant_id
    latest: dict[tuple[str, int], LatestEntry] = field(default_factory=dict)
    person_index: dict[tuple[str, int], int] = field(default_factory=dict)
    _person_seq: dict[str, int] = field(default_factory=dict)

    def roster_record(self) -> dict:
        entries = sorted(
            (p.roster_entry() for p in self.participants.values()),
            key=lambda e: e["participant_id"],
        )
        return {"tag": "ROSTER", "room": self.room_id, "participants": entries}


@dataclass(frozen=True)
class FrameBatch:
    """Structured form of one tick broadcast (the wire carries its bytes)."""

    room_id: str
    tick: int
    server_timestamp: float
    entries: tuple[BatchEntry, ...]


class RoomService:
    """Owns every room; all calls must come from the owning event loop."""

    def __init__(
        self,
        tick_rate: float = 30.0,
        stale_evict_ms: float = 1000.0,
        queue_depth: int = 8,
        registry: MetricsRegistry | None = None,
        clock=time.monotonic,
    ):
        if tick_rate <= 0:
            raise ValueError(f"tick_rate must be > 0, got {tick_rate}")
        self.tick_rate = tick_rate
        self.stale_evict_ms = stale_evict_ms
        self.queue_depth = queue_depth
        self.registry = registry or MetricsRegistry()
        self.clock = clock
        self.rooms: dict[str, Room] = {}
        self._next_participant = 1

    # -- roster ---------------------------------------------------------------

    def get_or_create_room(self, room_id: str) -> Room:
        # ids double as recording file names, so keep them path-safe
        # (explicit ASCII class: str.isalnum would admit unicode letters)
        if not re.fullmatch(r"[A-Za-z0-9._-]{1,64}", room_id):
            raise RoomError(f"room id must be 1-64 chars of [A-Za-z0-9._-], got {room_id!r}")
        room = self.rooms.get(room_id)
        if room is None:
            room = Room(room_id=room_id, tick_rate=self.tick_rate, stale_evict_ms=self.stale_evict_ms)
            self.rooms[room_id] = room
        return room

    def join(
        self,
        room_id: str,
        display_name: str,
        avatar: AvatarDescriptor,
        camera_id: str = "",
    ) -> Participant:
        """Add a participant; pushes a roster update to everyone already there."""
        room = self.get_or_create_room(room_id)
        if camera_id and camera_id in room.cameras:
            raise RoomError(f"camera {camera_id!r} already registered in room {room_id!r}")

        participant = Participant(
            participant_id=f"p{self._next_participant}",
            display_name=display_name,
            avatar=avatar,
            camera_id=camera_id,
            outbox=Outbox(self.queue_depth),
        )
        self._next_participant += 1

        room.participants[participant.participant_id] = participant
        if camera_id:
            room.cameras[camera_id] = participant.participant_id

        # everyone already present learns about the join before the next batch;
        # the joiner gets the same roster inside JOIN_OK instead
        payload = encode_record(room.roster_record())
        for other in room.participants.values():
            if other.participant_id != participant.participant_id:
                other.outbox.put_control(payload)
        return participant

    def leave(self, room_id: str, participant_id: str) -> None:
        room = self.rooms.get(room_id)
        if room is None:
            return
        participant = room.participants.pop(participant_id, None)
        if participant is None:
            return
        participant.outbox.close()
        if participant.camera_id:
            room.cameras.pop(participant.camera_id, None)
            for key in [k for k in room.latest if k[0] == participant.camera_id]:
                del room.latest[key]
        if room.participants:
            payload = encode_record(room.roster_record())
            for other in room.participants.values():
                other.outbox.put_control(payload)

    # -- motion ---------------------------------------------------------------

    def ingest(
        self,
        room_id: str,
        camera_id: str,
        frames: list[tuple[int, MotionFrame]],
        origin_ts: float | None = None,
    ) -> int:
        """Latest-wins update of the room's motion snapshot; returns drop count.

        ``origin_ts`` is when the raw detections behind these frames arrived,
        for end-to-end latency accounting; it defaults to now.
        """
        room = self.rooms.get(room_id)
        if room is None or camera_id not in room.cameras:
            self.registry.counter(f"room.{room_id}.ingest_dropped").inc(len(frames))
            return len(frames)
        now = self.clock()
        for track_id, frame in frames:
            key = (camera_id, track_id)
            if key not in room.person_index:
                seq = room._person_seq.get(camera_id, 0)
                room.person_index[key] = seq
                room._person_seq[camera_id] = seq + 1
            room.latest[key] = LatestEntry(
                frame=frame, receive_ts=now, origin_ts=now if origin_ts is None else origin_ts
            )
        return 0

    # -- tick -----------------------------------------------------------------

    def tick_room(self, room_id: str) -> tuple[bytes | None, FrameBatch]:
        """Advance one tick: snapshot, FK, serialize once, fan out.

        Returns (payload, batch); payload is None for participant-less rooms
        (the tick still advances and stale entries are still evicted).
        """
        room = self.rooms.get(room_id)
        if room is None:
            raise RoomError(f"unknown room {room_id!r}")
        now = self.clock()
        room.current_tick += 1
        self.registry.counter(f"room.{room_id}.ticks").inc()

        e2e = self.registry.histogram(f"room.{room_id}.e2e")
        entries: list[BatchEntry] = []
        for key in sorted(room.latest):
            entry = room.latest[key]
            staleness_ms = (now - entry.receive_ts) * 1000.0
            if staleness_ms > room.stale_evict_ms:
                del room.latest[key]
                continue
            camera_id, _ = key
            owner_id = room.cameras.get(camera_id)
            if owner_id is None:
                del room.latest[key]
                continue
            if not entry.measured:
                e2e.record(max(0.0, now - entry.origin_ts))
                entry.measured = True
            owner = room.participants[owner_id]
            skeleton = owner.avatar.skeleton or default_skeleton()
            pose = forward_kinematics(skeleton, entry.frame)
            entries.append(
                BatchEntry(
                    participant_id=owner_id,
                    person_index=room.person_index[key],
                    frame=entry.frame,
                    pose=pose,
                    staleness_ms=staleness_ms,
                )
            )

        batch = FrameBatch(
            room_id=room.room_id,
            tick=room.current_tick,
            server_timestamp=now,
            entries=tuple(sorted(entries, key=lambda e: (e.participant_id, e.person_index))),
        )
        if not room.participants:
            return None, batch

        payload = encode_record(frame_batch_record(room.room_id, batch.tick, now, entries))
        for participant in room.participants.values():
            participant.outbox.put_batch(payload)
        self.registry.counter(f"room.{room_id}.batches_sent").inc(len(room.participants))
        return payload, batch

    def export_metrics(self) -> None:
        """Publish per-room gauges into the registry (snapshot-style)."""
        for room in self.rooms.values():
            prefix = f"room.{room.room_id}"
            self.registry.set_gauge(f"{prefix}.participants", len(room.participants))
            self.registry.set_gauge(f"{prefix}.entries", len(room.latest))
            drops = sum(p.outbox.dropped for p in room.participants.values())
            self.registry.set_gauge(f"{prefix}.queue_drops", drops)
            for p in room.participants.values():
                self.registry.set_gauge(f"participant.{p.participant_id}.rtt_ms", p.rtt_ms)
