"""Headless wire-protocol client for tests, benches and CLI sources.

Pull-driven: the caller awaits the record kind it wants and everything else
read along the way lands in per-tag buffers (server PINGs are answered
immediately). No background tasks, so tests stay deterministic.
"""

from __future__ import annotations

import asyncio
import time

from .core import Detection, detection_to_dict
from .protocol import encode_message, read_message


class JoinRejected(Exception):
    """Server refused the JOIN; str(exc) is the server's reason."""


class RoomClient:
    def __init__(self, host: str = "127.0.0.1", port: int = 7430):
        self.host = host
        self.port = port
        self.reader: asyncio.StreamReader | None = None
        self.writer: asyncio.StreamWriter | None = None
        self.participant_id: str | None = None
        self.room: str | None = None
        self.camera_id: str = ""
        self.tick_rate: float = 0.0
        self.rosters: list[dict] = []
        self._batches: list[dict] = []
        self._ctrl_replies: list[dict] = []
        self._pongs: list[dict] = []
        self._nonce = 0

    async def connect(self) -> None:
        self.reader, self.writer = await asyncio.open_connection(self.host, self.port)

    async def close(self) -> None:
        if self.writer is None:
            return
        try:
            await self._send({"tag": "LEAVE"})
            self.writer.close()
            await self.writer.wait_closed()
        except (ConnectionError, OSError):
            pass
        self.writer = None
        self.reader = None

    async def _send(self, rec: dict) -> None:
        self.writer.write(encode_message(rec))
        await self.writer.drain()

    async def recv(self, timeout: float | None = None) -> dict | None:
        """Next record that is not a server PING (those are answered inline)."""
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            if deadline is None:
                rec = await read_message(self.reader)
            else:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise asyncio.TimeoutError()
                rec = await asyncio.wait_for(read_message(self.reader), remaining)
            if rec is None:
                return None
            if rec["tag"] == "PING":
                await self._send({"tag": "PONG", "nonce": rec.get("nonce", 0), "t": rec.get("t", 0.0)})
                continue
            return rec

    def _bucket(self, rec: dict) -> None:
        tag = rec["tag"]
        if tag == "FRAME_BATCH":
            self._batches.append(rec)
        elif tag == "ROSTER":
            self.rosters.append(rec)
        elif tag in ("CTRL_OK", "CTRL_ERR"):
            self._ctrl_replies.append(rec)
        elif tag == "PONG":
            self._pongs.append(rec)

    async def join(
        self,
        room: str,
        name: str = "headless",
        avatar: dict | None = None,
        camera_id: str = "",
        source: dict | None = None,
    ) -> dict:
        rec = {"tag": "JOIN", "room": room, "name": name, "camera_id": camera_id}
        if avatar is not None:
            rec["avatar"] = avatar
        if source is not None:
            rec["source"] = source
        await self._send(rec)
        while True:
            reply = await self.recv(timeout=10.0)
            if reply is None:
                raise ConnectionError("server closed during join")
            if reply["tag"] == "JOIN_OK":
                self.participant_id = reply["participant_id"]
                self.room = reply["room"]
                self.tick_rate = float(reply.get("tick_rate", 0.0))
                self.camera_id = camera_id
                return reply
            if reply["tag"] == "JOIN_ERR":
                raise JoinRejected(reply.get("reason", "join rejected"))
            self._bucket(reply)

    async def ingest(self, detections: list[Detection], t: float | None = None) -> None:
        rec = {
            "tag": "INGEST",
            "camera_id": self.camera_id,
            "detections": [detection_to_dict(d) for d in detections],
        }
        if t is not None:
            rec["t"] = t
        await self._send(rec)

    async def next_batch(self, timeout: float | None = 10.0) -> dict | None:
        """Next FRAME_BATCH record (other records keep accumulating)."""
        if self._batches:
            return self._batches.pop(0)
        deadline = None if timeout is None else time.monotonic() + timeout
        while True:
            remaining = None if deadline is None else deadline - time.monotonic()
            rec = await self.recv(timeout=remaining)
            if rec is None:
                return None
            if rec["tag"] == "FRAME_BATCH":
                return rec
            self._bucket(rec)

    async def ctrl(self, action: str, value=None, timeout: float = 10.0) -> dict:
        """Send a source control and wait for its CTRL_OK / CTRL_ERR."""
        self._nonce += 1
        nonce = self._nonce
        await self._send({"tag": "CTRL", "nonce": nonce, "action": action, "value": value})
        deadline = time.monotonic() + timeout
        while True:
            for i, rec in enumerate(self._ctrl_replies):
                if rec.get("nonce") == nonce:
                    return self._ctrl_replies.pop(i)
            rec = await self.recv(timeout=deadline - time.monotonic())
            if rec is None:
                raise ConnectionError("server closed during ctrl")
            self._bucket(rec)

    async def ping(self, timeout: float = 5.0) -> float:
        """Round-trip time in milliseconds."""
        self._nonce += 1
        nonce = self._nonce
        t0 = time.monotonic()
        await self._send({"tag": "PING", "nonce": nonce, "t": t0})
        deadline = t0 + timeout
        while True:
            for i, rec in enumerate(self._pongs):
                if rec.get("nonce") == nonce:
                    self._pongs.pop(i)
                    return (time.monotonic() - t0) * 1000.0
            rec = await self.recv(timeout=deadline - time.monotonic())
            if rec is None:
                raise ConnectionError("server closed during ping")
            self._bucket(rec)
