"""Performance harness: compute-only pipeline bench and networked loopback bench.

The compute bench runs tracker + smoothing + forward kinematics as fast as the
CPU allows on pre-generated detections. The loopback bench runs the real
server plus wire clients on localhost and reports end-to-end latency from
detection receipt to batch enqueue. Reports are written as CSV plus rendered
figures.
"""

from __future__ import annotations

import asyncio
import csv
import os
import time
from dataclasses import dataclass

from .config import ServerConfig, ServerSettings
from .kinematics import default_skeleton, forward_kinematics
from .metrics import LatencyHistogram, MetricsRegistry
from .pipeline import CameraPipeline
from .server import MotionServer
from .client import RoomClient
from .sources import ScenarioSpec, generate


@dataclass
class ComputeBenchReport:
    cameras: int
    persons: int
    frames_processed: int
    person_frames: int
    elapsed_s: float
    frame_cost: LatencyHistogram

    @property
    def frames_per_s(self) -> float:
        return self.frames_processed / self.elapsed_s if self.elapsed_s > 0 else 0.0

    @property
    def person_frames_per_s(self) -> float:
        return self.person_frames / self.elapsed_s if self.elapsed_s > 0 else 0.0

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("cameras", self.cameras),
            ("persons", self.persons),
            ("frames_processed", self.frames_processed),
            ("person_frames", self.person_frames),
            ("elapsed_s", round(self.elapsed_s, 6)),
            ("frames_per_s", round(self.frames_per_s, 1)),
            ("person_frames_per_s", round(self.person_frames_per_s, 1)),
            ("frame_cost_p50_ms", round(self.frame_cost.percentile(50) * 1e3, 3)),
            ("frame_cost_p95_ms", round(self.frame_cost.percentile(95) * 1e3, 3)),
            ("frame_cost_p99_ms", round(self.frame_cost.percentile(99) * 1e3, 3)),
        ]


@dataclass
class LoopbackBenchReport:
    cameras: int
    persons: int
    rate: float
    duration_s: float
    samples: int
    batches_received: int
    e2e: LatencyHistogram

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("cameras", self.cameras),
            ("persons", self.persons),
            ("rate_hz", self.rate),
            ("duration_s", self.duration_s),
            ("samples", self.samples),
            ("batches_received", self.batches_received),
            ("e2e_p50_ms", round(self.e2e.percentile(50) * 1e3, 3)),
            ("e2e_p95_ms", round(self.e2e.percentile(95) * 1e3, 3)),
            ("e2e_p99_ms", round(self.e2e.percentile(99) * 1e3, 3)),
            ("e2e_max_ms", round(self.e2e.max() * 1e3, 3)),
        ]


def _bench_spec(camera_index: int, persons: int, duration: float, rate: float, seed: int) -> ScenarioSpec:
    return ScenarioSpec(
        person_count=persons,
        duration=duration,
        rate=rate,
        noise_sigma_pose=0.03,
        noise_sigma_trans=0.01,
        seed=seed + camera_index,
        camera_id=f"bench{camera_index}",
    )


def run_compute_bench(
    cameras: int = 1,
    persons: int = 1,
    duration: float = 20.0,
    rate: float = 30.0,
    seed: int = 7,
) -> ComputeBenchReport:
    """Tracker + smoothing + FK at maximum rate, no network, no sleeping."""
    skeleton = default_skeleton()
    streams = []
    for c in range(cameras):
        spec = _bench_spec(c, persons, duration, rate, seed)
        pipeline = CameraPipeline(spec.camera_id, registry=MetricsRegistry())
        streams.append((pipeline, generate(spec).frames, spec.rate))

    cost = LatencyHistogram()
    frames = 0
    person_frames = 0
    t_start = time.perf_counter()
    for pipeline, cam_frames, cam_rate in streams:
        for k, dets in enumerate(cam_frames):
            t0 = time.perf_counter()
            out = pipeline.process(dets, t=k / cam_rate)
            for _, frame in out:
                forward_kinematics(skeleton, frame)
            cost.record(time.perf_counter() - t0)
            frames += 1
            person_frames += len(out)
    elapsed = time.perf_counter() - t_start
    return ComputeBenchReport(
        cameras=cameras,
        persons=persons,
        frames_processed=frames,
        person_frames=person_frames,
        elapsed_s=elapsed,
        frame_cost=cost,
    )


async def _loopback_camera(client: RoomClient, frames, rate: float) -> None:
    interval = 1.0 / rate
    loop = asyncio.get_running_loop()
    next_t = loop.time()
    for k, dets in enumerate(frames):
        delay = next_t - loop.time()
        if delay > 0:
            await asyncio.sleep(delay)
        await client.ingest(dets, t=k / rate)
        next_t += interval


async def _run_loopback(cameras: int, persons: int, duration: float, rate: float, seed: int) -> LoopbackBenchReport:
    cfg = ServerConfig(server=ServerSettings(port=0, tick_rate=rate))
    server = MotionServer(cfg)
    await server.start()
    port = server.port

    cam_clients: list[RoomClient] = []
    observer = RoomClient("127.0.0.1", port)
    await observer.connect()
    await observer.join("bench", name="observer")
    try:
        senders = []
        for c in range(cameras):
            spec = _bench_spec(c, persons, duration, rate, seed)
            client = RoomClient("127.0.0.1", port)
            await client.connect()
            await client.join("bench", name=f"cam{c}", camera_id=spec.camera_id)
            cam_clients.append(client)
            senders.append(_loopback_camera(client, generate(spec).frames, rate))

        batches = 0

        async def drain():
            nonlocal batches
            while True:
                rec = await observer.next_batch(timeout=None)
                if rec is None:
                    return
                batches += 1

        drain_task = asyncio.create_task(drain())
        await asyncio.gather(*senders)
        await asyncio.sleep(2.0 / rate)   # let the last ingests reach a tick
        drain_task.cancel()
        await asyncio.gather(drain_task, return_exceptions=True)

        e2e = server.registry.histogram("room.bench.e2e")
        return LoopbackBenchReport(
            cameras=cameras,
            persons=persons,
            rate=rate,
            duration_s=duration,
            samples=e2e.count,
            batches_received=batches,
            e2e=e2e,
        )
    finally:
        for client in cam_clients:
            await client.close()
        await observer.close()
        await server.stop()


def run_loopback_bench(
    cameras: int = 4,
    persons: int = 2,
    duration: float = 10.0,
    rate: float = 30.0,
    seed: int = 7,
) -> LoopbackBenchReport:
    return asyncio.run(_run_loopback(cameras, persons, duration, rate, seed))


# --- report output --------------------------------------------------------------


def write_csv(path: str, rows: list[tuple[str, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerows(rows)


def _histogram_points(hist: LatencyHistogram) -> tuple[list[float], list[int]]:
    xs, ys = [], []
    for idx in range(1, hist.BIN_COUNT + 1):
        count = hist._counts[idx]
        if count:
            xs.append(hist._upper_edge(idx) * 1e3)
            ys.append(count)
    return xs, ys


def render_figures(out_dir: str, compute: ComputeBenchReport, loopback: LoopbackBenchReport | None) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []

    fig, ax = plt.subplots(figsize=(7, 4))
    xs, ys = _histogram_points(compute.frame_cost)
    ax.bar(range(len(xs)), ys, color="#4c72b0")
    ax.set_xticks(range(len(xs)), [f"{x:.2f}" for x in xs], rotation=45, fontsize=7)
    ax.set_xlabel("per-frame pipeline cost upper bin edge (ms)")
    ax.set_ylabel("frames")
    ax.set_title(
        f"compute bench: {compute.cameras} cam x {compute.persons} persons, "
        f"{compute.person_frames_per_s:.0f} person-frames/s"
    )
    fig.tight_layout()
    path = os.path.join(out_dir, "compute_cost_hist.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(path)

    if loopback is not None:
        fig, ax = plt.subplots(figsize=(7, 4))
        xs, ys = _histogram_points(loopback.e2e)
        ax.bar(range(len(xs)), ys, color="#55a868")
        ax.set_xticks(range(len(xs)), [f"{x:.2f}" for x in xs], rotation=45, fontsize=7)
        ax.set_xlabel("end-to-end latency upper bin edge (ms)")
        ax.set_ylabel("samples")
        ax.set_title(
            f"loopback bench: {loopback.cameras} cam x {loopback.persons} persons @ {loopback.rate:.0f} Hz, "
            f"p95 {loopback.e2e.percentile(95) * 1e3:.1f} ms"
        )
        fig.tight_layout()
        path = os.path.join(out_dir, "loopback_e2e_hist.png")
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)

    return written


def run_bench_report(
    out_dir: str,
    cameras: int = 4,
    persons: int = 2,
    duration: float = 10.0,
    rate: float = 30.0,
    seed: int = 7,
    loopback: bool = True,
) -> tuple[dict[str, str], ComputeBenchReport, LoopbackBenchReport | None]:
    """Run both benches and write CSV + figures; returns written paths + reports."""
    os.makedirs(out_dir, exist_ok=True)
    compute = run_compute_bench(cameras=cameras, persons=persons, duration=duration, rate=rate, seed=seed)
    lb = None
    if loopback:
        lb = run_loopback_bench(cameras=cameras, persons=persons, duration=duration, rate=rate, seed=seed)

    paths = {}
    compute_csv = os.path.join(out_dir, "compute_bench.csv")
    write_csv(compute_csv, compute.rows())
    paths["compute_csv"] = compute_csv
    if lb is not None:
        loopback_csv = os.path.join(out_dir, "loopback_bench.csv")
        write_csv(loopback_csv, lb.rows())
        paths["loopback_csv"] = loopback_csv
    for i, figure in enumerate(render_figures(out_dir, compute, lb)):
        paths[f"figure_{i}"] = figure
    return paths, compute, lb
