from __future__ import annotations

import json
import math

import numpy as np
import pytest

from motionroom.core import (
    CameraIntrinsics,
    Detection,
    DetectionRejected,
    MotionFrame,
    ObsUVZS,
    ReplayLineError,
    detection_from_dict,
    detection_from_line,
    detection_to_dict,
    detection_to_line,
    motion_frame_close,
    project_translation,
    unproject_obs,
)

from reference import naive_project


def make_detection(**overrides):
    base = dict(
        camera_id="cam0",
        frame_index=0,
        timestamp=0.0,
        confidence=0.9,
        global_orient=np.zeros(3),
        body_pose=np.zeros(69),
        translation=np.array([0.0, 0.0, 2.0]),
    )
    base.update(overrides)
    return Detection(**base)


def test_projection_on_axis():
    k = CameraIntrinsics(focal_px=500.0, principal_point=(256.0, 256.0), image_size=(512.0, 512.0))
    o = project_translation(np.array([0.0, 0.0, 2.0]), k)
    assert (o.u, o.v, o.z, o.s) == (256.0, 256.0, 2.0, 0.5)


def test_projection_off_axis_hand_value():
    k = CameraIntrinsics(focal_px=500.0, principal_point=(256.0, 256.0), image_size=(512.0, 512.0))
    o = project_translation(np.array([1.0, 0.5, 2.0]), k)
    assert (o.u, o.v, o.z, o.s) == (506.0, 381.0, 2.0, 0.5)


def test_projection_matches_naive_formula():
    k = CameraIntrinsics(focal_px=548.0, principal_point=(256.0, 256.0), image_size=(512.0, 512.0))
    rng = np.random.default_rng(11)
    for _ in range(200):
        x, y = rng.normal(0, 1.5, 2)
        z = rng.uniform(0.3, 9.0)
        o = project_translation(np.array([x, y, z]), k)
        u, v, zz, s = naive_project(x, y, z, 548.0, 256.0, 256.0)
        assert math.isclose(o.u, u, rel_tol=0, abs_tol=1e-12)
        assert math.isclose(o.v, v, rel_tol=0, abs_tol=1e-12)
        assert o.z == zz and o.s == s


def test_unproject_round_trip_1000():
    k = CameraIntrinsics(focal_px=548.0, principal_point=(256.0, 256.0), image_size=(512.0, 512.0))
    rng = np.random.default_rng(7)
    for _ in range(1000):
        t = np.array([rng.normal(0, 2), rng.normal(0, 2), rng.uniform(0.2, 50.0)])
        back = unproject_obs(project_translation(t, k), k)
        assert np.allclose(back, t, rtol=1e-9, atol=0)


def test_scale_consistency_doubling_z_halves_s():
    k = CameraIntrinsics(focal_px=548.0, principal_point=(256.0, 256.0), image_size=(512.0, 512.0))
    o1 = project_translation(np.array([0.4, -0.2, 2.0]), k)
    o2 = project_translation(np.array([0.4, -0.2, 4.0]), k)
    assert o2.s == o1.s / 2.0


def test_nonpositive_z_rejected():
    k = CameraIntrinsics(focal_px=548.0, principal_point=(256.0, 256.0), image_size=(512.0, 512.0))
    with pytest.raises(DetectionRejected):
        project_translation(np.array([0.0, 0.0, 0.0]), k)
    with pytest.raises(DetectionRejected):
        project_translation(np.array([0.0, 0.0, -1.0]), k)


def test_obs_s_is_derived_from_z():
    o = ObsUVZS(u=10.0, v=20.0, z=4.0)
    assert o.s == 0.25
    with pytest.raises(ValueError):
        ObsUVZS(u=0.0, v=0.0, z=0.0)


def test_detection_validation():
    with pytest.raises(ValueError):
        make_detection(confidence=1.5)
    with pytest.raises(ValueError):
        make_detection(translation=np.array([0.0, 0.0, -2.0]))
    with pytest.raises(ValueError):
        make_detection(body_pose=np.zeros(68))
    with pytest.raises(ValueError):
        make_detection(global_orient=np.array([0.0, np.nan, 0.0]))


def test_detection_line_round_trip():
    det = make_detection(
        frame_index=17,
        timestamp=0.5666666666666667,
        confidence=0.8125,
        global_orient=np.array([0.1, -0.2, 0.3]),
        translation=np.array([1.25, -0.5, 3.75]),
    )
    line = detection_to_line(det)
    back = detection_from_line(line)
    assert back.camera_id == det.camera_id
    assert back.frame_index == det.frame_index
    assert back.timestamp == det.timestamp
    assert back.confidence == det.confidence
    assert np.array_equal(back.global_orient, det.global_orient)
    assert np.array_equal(back.body_pose, det.body_pose)
    assert np.array_equal(back.translation, det.translation)


def test_detection_line_is_flat_json_object():
    line = detection_to_line(make_detection())
    rec = json.loads(line)
    assert set(rec) == {
        "camera_id", "frame_index", "timestamp", "confidence",
        "global_orient", "body_pose", "translation",
    }
    assert len(rec["body_pose"]) == 69


def test_detection_line_unknown_keys_ignored():
    rec = detection_to_dict(make_detection())
    rec["extra"] = "whatever"
    det = detection_from_dict(rec)
    assert det.camera_id == "cam0"


def test_detection_line_missing_key_reported():
    rec = detection_to_dict(make_detection())
    del rec["translation"]
    with pytest.raises(ReplayLineError) as e:
        detection_from_dict(rec)
    assert "translation" in str(e.value)


def test_detection_line_malformed_json():
    with pytest.raises(ReplayLineError):
        detection_from_line("{not json")


def test_motion_frame_close():
    a = MotionFrame(
        person_id=1, camera_id="cam0", timestamp=0.0,
        global_orient=np.zeros(3), body_pose=np.zeros(69),
        translation=np.array([0.0, 0.0, 2.0]),
    )
    b = MotionFrame(
        person_id=1, camera_id="cam0", timestamp=0.0,
        global_orient=np.zeros(3), body_pose=np.zeros(69),
        translation=np.array([0.0, 0.0, 2.0 + 1e-13]),
    )
    assert motion_frame_close(a, b, tol=1e-12)
    assert not motion_frame_close(a, b, tol=1e-14)
