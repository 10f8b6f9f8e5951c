"""Wire protocol: length-prefixed frames carrying tagged JSON records.

Framing is a 4-byte big-endian payload length followed by the payload, one
record per frame. Records are JSON objects with a ``tag`` field, serialized
canonically (sorted keys, no whitespace) so a record has exactly one byte
representation. FRAME_BATCH payloads are built once per tick and the same
bytes are handed to every recipient.
"""

from __future__ import annotations

import asyncio
import json
import struct
from dataclasses import dataclass

import numpy as np

from .core import MotionFrame
from .kinematics import SkeletonPose

MAX_FRAME_BYTES = 16 * 1024 * 1024
_HEADER = struct.Struct(">I")

TAGS = frozenset(
    {
        "JOIN",
        "JOIN_OK",
        "JOIN_ERR",
        "ROSTER",
        "INGEST",
        "FRAME_BATCH",
        "PING",
        "PONG",
        "LEAVE",
        "CTRL",
        "CTRL_OK",
        "CTRL_ERR",
    }
)

CTRL_ACTIONS = frozenset({"scenario", "speed", "pause", "resume"})


class ProtocolError(ValueError):
    """Malformed frame or record; the offending connection should be closed."""


def encode_record(rec: dict) -> bytes:
    tag = rec.get("tag")
    if tag not in TAGS:
        raise ProtocolError(f"unknown or missing tag: {tag!r}")
    try:
        return json.dumps(rec, sort_keys=True, separators=(",", ":"), allow_nan=False).encode("utf-8")
    except (TypeError, ValueError) as e:
        raise ProtocolError(f"unencodable record: {e}") from None


def decode_record(payload: bytes) -> dict:
    try:
        rec = json.loads(payload.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ProtocolError(f"invalid record: {e}") from None
    if not isinstance(rec, dict):
        raise ProtocolError("record is not an object")
    if rec.get("tag") not in TAGS:
        raise ProtocolError(f"unknown or missing tag: {rec.get('tag')!r}")
    return rec


def pack_frame(payload: bytes) -> bytes:
    if len(payload) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds {MAX_FRAME_BYTES}")
    return _HEADER.pack(len(payload)) + payload


def encode_message(rec: dict) -> bytes:
    return pack_frame(encode_record(rec))


async def read_frame(reader: asyncio.StreamReader) -> bytes | None:
    """Next frame payload, or None on clean EOF at a frame boundary."""
    try:
        header = await reader.readexactly(_HEADER.size)
    except asyncio.IncompleteReadError as e:
        if e.partial:
            raise ProtocolError("connection closed mid-header") from None
        return None
    (length,) = _HEADER.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {length} bytes exceeds {MAX_FRAME_BYTES}")
    try:
        return await reader.readexactly(length)
    except asyncio.IncompleteReadError:
        raise ProtocolError("connection closed mid-frame") from None


async def read_message(reader: asyncio.StreamReader) -> dict | None:
    payload = await read_frame(reader)
    return None if payload is None else decode_record(payload)


def split_frames(data: bytes) -> list[bytes]:
    """Split a byte string of concatenated frames (transcripts, tests)."""
    out = []
    offset = 0
    while offset < len(data):
        if offset + _HEADER.size > len(data):
            raise ProtocolError("trailing bytes shorter than a header")
        (length,) = _HEADER.unpack_from(data, offset)
        offset += _HEADER.size
        if offset + length > len(data):
            raise ProtocolError("truncated frame")
        out.append(data[offset : offset + length])
        offset += length
    return out


def require(rec: dict, key: str, kind: type | tuple[type, ...]):
    """Fetch a required field, raising a field-specific ProtocolError."""
    if key not in rec:
        raise ProtocolError(f"{rec.get('tag')}: missing field {key!r}")
    value = rec[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ProtocolError(f"{rec.get('tag')}: field {key!r} has wrong type {type(value).__name__}")
    return value


# --- FRAME_BATCH payload ------------------------------------------------------
#
# Motion channels and joint positions travel as float32 values: the precision
# matches what a renderer consumes and roughly halves the encoded size.


def _f32(x: float) -> float:
    return float(np.float32(x))


def _vec_f32(a) -> list[float]:
    return [float(v) for v in np.asarray(a, dtype=np.float32)]


@dataclass(frozen=True)
class BatchEntry:
    """One person's share of a tick broadcast."""

    participant_id: str
    person_index: int
    frame: MotionFrame
    pose: SkeletonPose
    staleness_ms: float


def entry_to_dict(e: BatchEntry) -> dict:
    return {
        "participant_id": e.participant_id,
        "person_index": e.person_index,
        "timestamp": e.frame.timestamp,
        "global_orient": _vec_f32(e.frame.global_orient),
        "body_pose": _vec_f32(e.frame.body_pose),
        "translation": _vec_f32(e.frame.translation),
        "joints": [_vec_f32(row) for row in e.pose.joint_positions],
        "staleness_ms": _f32(e.staleness_ms),
    }


def frame_batch_record(room_id: str, tick: int, server_timestamp: float, entries: list[BatchEntry]) -> dict:
    ordered = sorted(entries, key=lambda e: (e.participant_id, e.person_index))
    return {
        "tag": "FRAME_BATCH",
        "room": room_id,
        "tick": tick,
        "server_timestamp": round(server_timestamp, 6),
        "entries": [entry_to_dict(e) for e in ordered],
    }
