from __future__ import annotations

import os

import pytest

from motionroom.cli import main
from motionroom.config import RecordSettings, ServerConfig, ServerSettings
from motionroom.core import detection_from_line
from motionroom.sources import named_scenarios, scenario_to_mapping

from live_server import ServerThread


# --- serve config validation -------------------------------------------------------

def test_serve_refuses_inverted_taus(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[tracker]\ntau_high = 0.2\ntau_low = 0.6\n")
    assert main(["serve", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "tau_low" in err and "tau_high" in err


def test_serve_refuses_bad_port(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[server]\nport = notaport\n")
    assert main(["serve", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "[server]" in err and "port" in err


def test_serve_missing_config_file(capsys):
    assert main(["serve", "--config", "/nonexistent/motionroom.ini"]) == 2
    assert "config error" in capsys.readouterr().err


# --- record ---------------------------------------------------------------------

def test_record_writes_replayable_file(tmp_path, capsys):
    out = tmp_path / "take.jsonl"
    assert main(["record", "--scenario", "duo", "--duration", "1", "--out", str(out)]) == 0
    assert "wrote" in capsys.readouterr().out
    lines = out.read_text().splitlines()
    assert lines[0].startswith("#")
    dets = [detection_from_line(l) for l in lines[1:]]
    assert len(dets) == 60    # 30 frames of 2 people
    assert {d.camera_id for d in dets} == {"cam0"}


def test_record_unknown_scenario(tmp_path, capsys):
    assert main(["record", "--scenario", "nope", "--out", str(tmp_path / "x.jsonl")]) == 2
    assert "unknown scenario" in capsys.readouterr().err


def test_record_spec_file_round_trip(tmp_path):
    spec = named_scenarios()["duo"]
    spec_file = tmp_path / "duo.spec"
    spec_file.write_text(
        "# comment\n" + "\n".join(f"{k} = {v}" for k, v in scenario_to_mapping(spec).items()) + "\n"
    )
    out = tmp_path / "take.jsonl"
    assert main(["record", "--spec", str(spec_file), "--duration", "0.5", "--out", str(out)]) == 0
    dets = [detection_from_line(l) for l in out.read_text().splitlines()[1:]]
    assert len(dets) == 30


def test_record_bad_spec_line(tmp_path, capsys):
    spec_file = tmp_path / "broken.spec"
    spec_file.write_text("persons: 2\n")
    assert main(["record", "--spec", str(spec_file), "--out", str(tmp_path / "x.jsonl")]) == 2
    assert "expected key = value" in capsys.readouterr().err


# --- synth / replay against a live server ----------------------------------------

def test_synth_without_server(capsys):
    assert main(["synth", "--port", "1", "--room", "demo", "--duration", "0.2"]) == 1
    assert "cannot reach server" in capsys.readouterr().err


def test_synth_streams_into_room(tmp_path):
    cfg = ServerConfig(
        server=ServerSettings(port=0),
        record=RecordSettings(dir=str(tmp_path)),
    )
    with ServerThread(cfg) as srv:
        rc = main([
            "synth", "--port", str(srv.port), "--room", "demo",
            "--scenario", "duo", "--duration", "0.5", "--speed", "0",
        ])
        assert rc == 0
    lines = (tmp_path / "demo.jsonl").read_text().splitlines()
    dets = [detection_from_line(l) for l in lines[1:]]
    assert len(dets) == 30    # 15 frames of 2 people landed server-side


def test_replay_missing_file(capsys):
    assert main(["replay", "/nonexistent/take.jsonl", "--port", "1"]) == 2
    assert "replay failed" in capsys.readouterr().err


def test_replay_streams_recording(tmp_path):
    take = tmp_path / "take.jsonl"
    assert main(["record", "--scenario", "duo", "--duration", "0.5", "--out", str(take)]) == 0
    record_dir = tmp_path / "server"
    cfg = ServerConfig(
        server=ServerSettings(port=0),
        record=RecordSettings(dir=str(record_dir)),
    )
    with ServerThread(cfg) as srv:
        rc = main(["replay", str(take), "--port", str(srv.port), "--room", "again", "--speed", "0"])
        assert rc == 0
    replayed = [
        detection_from_line(l)
        for l in (record_dir / "again.jsonl").read_text().splitlines()[1:]
    ]
    original = [detection_from_line(l) for l in take.read_text().splitlines()[1:]]
    assert len(replayed) == len(original) == 30


# --- bench -------------------------------------------------------------------------

def test_bench_report_files(tmp_path, capsys):
    out_dir = tmp_path / "report"
    rc = main([
        "bench", "--cameras", "1", "--persons", "1", "--duration", "0.5",
        "--no-loopback", "--out", str(out_dir),
    ])
    assert rc == 0
    out = capsys.readouterr().out
    assert "compute.person_frames_per_s" in out
    assert "loopback." not in out
    names = os.listdir(out_dir)
    assert any(n.endswith(".csv") for n in names)
    assert any(n.endswith(".png") for n in names)
