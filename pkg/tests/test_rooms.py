from __future__ import annotations

import asyncio
import json
import random

import numpy as np
import pytest

from motionroom.core import MotionFrame
from motionroom.kinematics import skeleton_to_lines, default_skeleton
from motionroom.protocol import decode_record
from motionroom.rooms import (
    AvatarDescriptor,
    Outbox,
    Participant,
    RoomError,
    RoomService,
)


class FakeClock:
    def __init__(self, t=100.0):
        self.t = t

    def __call__(self):
        return self.t

    def advance(self, dt):
        self.t += dt


def frame_of(person_id, t=0.0, camera_id="camA", x=0.0):
    return MotionFrame(
        person_id=person_id, camera_id=camera_id, timestamp=t,
        global_orient=np.zeros(3), body_pose=np.zeros(69),
        translation=np.array([x, 0.0, 2.0]),
    )


def drain(outbox):
    """All queued payload records, decoded, without blocking."""
    out = []
    while len(outbox):
        out.append(decode_record(asyncio.run(outbox.get())))
    return out


def service(clock=None):
    return RoomService(tick_rate=30.0, stale_evict_ms=1000.0, queue_depth=8,
                       clock=clock or FakeClock())


AVATAR = AvatarDescriptor()


# --- outbox -------------------------------------------------------------------

def test_outbox_drop_oldest_batches():
    box = Outbox(depth=3)
    for i in range(5):
        box.put_batch(f"b{i}".encode())
    assert box.dropped == 2
    got = []
    while len(box):
        got.append(asyncio.run(box.get()))
    assert got == [b"b2", b"b3", b"b4"]


def test_outbox_controls_never_dropped():
    box = Outbox(depth=2)
    box.put_control(b"c0")
    for i in range(6):
        box.put_batch(f"b{i}".encode())
    box.put_control(b"c1")
    items = []
    while len(box):
        items.append(asyncio.run(box.get()))
    assert b"c0" in items and b"c1" in items
    assert box.dropped == 4


def test_outbox_closed_returns_none():
    box = Outbox(depth=2)
    box.put_batch(b"x")
    box.close()
    assert asyncio.run(box.get()) == b"x"
    assert asyncio.run(box.get()) is None


# --- join / leave ----------------------------------------------------------------

def test_join_first_participant():
    svc = service()
    p = svc.join("lobby", "ana", AVATAR, camera_id="camA")
    room = svc.rooms["lobby"]
    assert list(room.participants) == [p.participant_id]
    assert room.cameras == {"camA": p.participant_id}
    assert drain(p.outbox) == []  # joiner learns the roster from JOIN_OK


def test_join_pushes_roster_to_existing():
    svc = service()
    p1 = svc.join("lobby", "ana", AVATAR, camera_id="camA")
    p2 = svc.join("lobby", "bo", AVATAR, camera_id="camB")
    msgs = drain(p1.outbox)
    assert len(msgs) == 1
    assert msgs[0]["tag"] == "ROSTER"
    names = [e["name"] for e in msgs[0]["participants"]]
    assert names == ["ana", "bo"]
    assert drain(p2.outbox) == []


def test_leave_pushes_shrunk_roster():
    svc = service()
    p1 = svc.join("lobby", "ana", AVATAR, camera_id="camA")
    p2 = svc.join("lobby", "bo", AVATAR, camera_id="camB")
    drain(p1.outbox)
    svc.leave("lobby", p2.participant_id)
    msgs = drain(p1.outbox)
    assert len(msgs) == 1
    assert [e["name"] for e in msgs[0]["participants"]] == ["ana"]
    assert "camB" not in svc.rooms["lobby"].cameras


def test_duplicate_display_name_allowed():
    svc = service()
    p1 = svc.join("lobby", "ana", AVATAR)
    p2 = svc.join("lobby", "ana", AVATAR)
    assert p1.participant_id != p2.participant_id


def test_duplicate_camera_rejected():
    svc = service()
    svc.join("lobby", "ana", AVATAR, camera_id="camA")
    with pytest.raises(RoomError):
        svc.join("lobby", "bo", AVATAR, camera_id="camA")


def test_room_id_validation():
    svc = service()
    for bad in ("", "a" * 65, "up/../etc", "white space", "naïve"):
        with pytest.raises(RoomError):
            svc.get_or_create_room(bad)
    svc.get_or_create_room("ok-room_1.2")


def test_avatar_short_skeleton_rejected():
    rows = [json.loads(l) for l in skeleton_to_lines(default_skeleton())][:23]
    with pytest.raises(RoomError) as e:
        AvatarDescriptor.from_dict({"avatar_id": "x", "color": "#112233", "skeleton": rows})
    assert "24" in str(e.value)


def test_avatar_color_validated():
    with pytest.raises(RoomError):
        AvatarDescriptor.from_dict({"avatar_id": "x", "color": "red"})


def test_avatar_round_trip_with_skeleton():
    av = AvatarDescriptor(avatar_id="custom", color="#a1b2c3", skeleton=default_skeleton())
    again = AvatarDescriptor.from_dict(av.to_dict())
    assert again.avatar_id == "custom"
    assert np.array_equal(again.skeleton.rest_offsets, av.skeleton.rest_offsets)


# --- ingest ------------------------------------------------------------------------

def test_ingest_unknown_camera_counted():
    svc = service()
    svc.join("lobby", "ana", AVATAR, camera_id="camA")
    dropped = svc.ingest("lobby", "ghost", [(1, frame_of(1))])
    assert dropped == 1
    assert svc.registry.counter("room.lobby.ingest_dropped").value == 1


def test_ingest_latest_wins():
    clock = FakeClock()
    svc = service(clock)
    p = svc.join("lobby", "ana", AVATAR, camera_id="camA")
    svc.ingest("lobby", "camA", [(1, frame_of(1, t=0.0, x=0.0))])
    svc.ingest("lobby", "camA", [(1, frame_of(1, t=0.01, x=5.0))])
    payload, batch = svc.tick_room("lobby")
    assert len(batch.entries) == 1
    assert float(batch.entries[0].frame.translation[0]) == 5.0


def test_person_index_first_seen_order():
    svc = service()
    svc.join("lobby", "ana", AVATAR, camera_id="camA")
    svc.ingest("lobby", "camA", [(7, frame_of(7)), (3, frame_of(3))])
    _, batch = svc.tick_room("lobby")
    by_track = {e.frame.person_id: e.person_index for e in batch.entries}
    assert by_track == {7: 0, 3: 1}
    # a later track gets the next index even after the first two persist
    svc.ingest("lobby", "camA", [(9, frame_of(9))])
    _, batch2 = svc.tick_room("lobby")
    by_track2 = {e.frame.person_id: e.person_index for e in batch2.entries}
    assert by_track2[9] == 2


# --- tick ---------------------------------------------------------------------------

def test_tick_monotone_and_empty_room_suppressed():
    svc = service()
    svc.get_or_create_room("empty")
    ticks = []
    for _ in range(5):
        payload, batch = svc.tick_room("empty")
        assert payload is None  # no participants: nothing on the wire
        ticks.append(batch.tick)
    assert ticks == [1, 2, 3, 4, 5]


def test_tick_with_participants_sends_empty_batch():
    svc = service()
    p = svc.join("lobby", "ana", AVATAR)
    payload, batch = svc.tick_room("lobby")
    assert payload is not None
    rec = decode_record(payload)
    assert rec["tag"] == "FRAME_BATCH" and rec["entries"] == []
    assert drain(p.outbox)[-1] == rec


def test_broadcast_byte_identical_across_participants():
    svc = service()
    ps = [svc.join("lobby", f"u{i}", AVATAR) for i in range(3)]
    cam = svc.join("lobby", "cam", AVATAR, camera_id="camA")
    svc.ingest("lobby", "camA", [(1, frame_of(1)), (2, frame_of(2, x=1.0))])
    for p in ps:
        drain(p.outbox)  # clear roster controls
    drain(cam.outbox)
    payload, _ = svc.tick_room("lobby")
    raws = []
    for p in ps + [cam]:
        while len(p.outbox):
            raws.append(asyncio.run(p.outbox.get()))
    assert len(raws) == 4
    assert all(r == payload for r in raws)


def test_staleness_eviction():
    clock = FakeClock()
    svc = service(clock)
    svc.join("lobby", "ana", AVATAR, camera_id="camA")
    svc.ingest("lobby", "camA", [(1, frame_of(1))])
    clock.advance(0.5)
    _, batch = svc.tick_room("lobby")
    assert len(batch.entries) == 1
    assert abs(batch.entries[0].staleness_ms - 500.0) < 1e-6
    clock.advance(0.6)  # total 1100 ms > 1000 ms
    _, batch2 = svc.tick_room("lobby")
    assert batch2.entries == ()
    assert svc.rooms["lobby"].latest == {}


def test_absent_person_persists_until_eviction():
    clock = FakeClock()
    svc = service(clock)
    svc.join("lobby", "ana", AVATAR, camera_id="camA")
    svc.ingest("lobby", "camA", [(1, frame_of(1))])
    for _ in range(5):  # no further ingests; entry stays while fresh
        clock.advance(1 / 30)
        _, batch = svc.tick_room("lobby")
        assert len(batch.entries) == 1


def test_e2e_latency_recorded_once_per_sample():
    clock = FakeClock()
    svc = service(clock)
    svc.join("lobby", "ana", AVATAR, camera_id="camA")
    svc.ingest("lobby", "camA", [(1, frame_of(1))], origin_ts=clock() - 0.010)
    for _ in range(4):
        clock.advance(1 / 30)
        svc.tick_room("lobby")
    h = svc.registry.histogram("room.lobby.e2e")
    assert h.count == 1  # one sample, despite four ticks broadcasting it


def test_room_isolation():
    svc = service()
    pa = svc.join("roomA", "ana", AVATAR, camera_id="camA")
    pb = svc.join("roomB", "bo", AVATAR, camera_id="camB")
    svc.ingest("roomA", "camA", [(1, frame_of(1))])
    svc.tick_room("roomA")
    assert drain(pb.outbox) == []
    msgs = drain(pa.outbox)
    assert all(m["room"] == "roomA" for m in msgs if "room" in m)


def test_slow_consumer_does_not_block_others():
    svc = service()
    slow = svc.join("lobby", "slow", AVATAR)
    fast = svc.join("lobby", "fast", AVATAR)
    drain(slow.outbox)
    for _ in range(30):  # far beyond queue depth; nothing ever blocks
        svc.tick_room("lobby")
    assert slow.outbox.dropped > 0
    fast_msgs = drain(fast.outbox)
    batches = [m for m in fast_msgs if m["tag"] == "FRAME_BATCH"]
    # fast consumer kept up to the queue depth most recent batches
    assert [b["tick"] for b in batches] == sorted(b["tick"] for b in batches)
    assert batches[-1]["tick"] == 30


def test_rtt_ewma():
    p = Participant("p1", "ana", AVATAR, "", Outbox(2))
    for _ in range(3):
        p.observe_rtt(10.0)
    assert p.rtt_ms == 10.0
    p.observe_rtt(20.0)
    assert abs(p.rtt_ms - (0.1 * 20.0 + 0.9 * 10.0)) < 1e-12


def test_churn_keeps_state_consistent():
    rng = random.Random(99)
    clock = FakeClock()
    svc = service(clock)
    alive = {}  # participant_id -> camera_id
    counter = 0
    for step in range(300):
        action = rng.random()
        clock.advance(0.01)
        if action < 0.4 or not alive:
            counter += 1
            cam = f"cam{counter}"
            p = svc.join("lobby", f"u{counter}", AVATAR, camera_id=cam)
            alive[p.participant_id] = cam
        elif action < 0.6:
            pid = rng.choice(list(alive))
            svc.leave("lobby", pid)
            del alive[pid]
        elif action < 0.9:
            pid = rng.choice(list(alive))
            cam = alive[pid]
            svc.ingest("lobby", cam, [(rng.randint(1, 3), frame_of(1, camera_id=cam))])
        else:
            svc.tick_room("lobby")
    room = svc.rooms["lobby"]
    assert set(room.participants) == set(alive)
    assert set(room.cameras.values()) <= set(alive)
    for (camera_id, _tid) in room.latest:
        assert camera_id in room.cameras


def test_export_metrics_gauges():
    svc = service()
    svc.join("lobby", "ana", AVATAR, camera_id="camA")
    svc.ingest("lobby", "camA", [(1, frame_of(1))])
    svc.export_metrics()
    text = svc.registry.render()
    assert "room.lobby.participants 1" in text
    assert "room.lobby.entries 1" in text
