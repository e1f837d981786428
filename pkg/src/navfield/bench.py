"""Scripted-trajectory benchmark harness: drives the live-loop machinery
pose by pose, times the predict and visualization stages separately, and
renders the 50-run statistics as a table (markdown or CSV) plus figures.

Unlike the live session, the benchmark awaits every field before sending
the next pose, so nothing ever coalesces: run count in equals run count
out.
"""

from __future__ import annotations

import json
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from .engine import Predictor
from .errors import InvalidScheme, NavfieldError
from .geometry import RigidPose, compose, make_pose, rotation_about
from .server import (
    RunTiming,
    Session,
    SessionConfig,
    StageStats,
    build_predictor,
    load_assets,
    stage_stats,
)
from .volio import SurfaceMesh


# --- trajectories -----------------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    poses: tuple
    scheme: str
    seed: int | None = None

    def __post_init__(self):
        if len(self.poses) < 1:
            raise InvalidScheme("a trajectory needs at least one pose")
        object.__setattr__(self, "poses", tuple(self.poses))

    def __len__(self) -> int:
        return len(self.poses)


def handle_rotations(n: int, base_pose: RigidPose | None = None) -> Trajectory:
    """n poses at a fixed scalp point, rotating the coil handle about the
    coil axis in uniform 360/n degree steps."""
    if n < 1:
        raise InvalidScheme("handle_rotations needs n >= 1")
    base = base_pose or RigidPose.identity()
    poses = []
    for k in range(n):
        spin = make_pose(rotation_about((0, 0, 1), 2.0 * np.pi * k / n),
                         (0, 0, 0))
        poses.append(compose(base, spin))
    return Trajectory(poses=tuple(poses), scheme=f"handle_rotations({n})")


def _uniform_rotation(rng) -> np.ndarray:
    # Shoemake's uniform random rotation from three uniforms
    u1, u2, u3 = rng.uniform(0, 1, 3)
    a, b = np.sqrt(1.0 - u1), np.sqrt(u1)
    qx = a * np.sin(2 * np.pi * u2)
    qy = a * np.cos(2 * np.pi * u2)
    qz = b * np.sin(2 * np.pi * u3)
    qw = b * np.cos(2 * np.pi * u3)
    x, y, z, w = qx, qy, qz, qw
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_trajectory(seed: int, n: int,
                      box=((-20.0, -20.0, -10.0), (20.0, 20.0, 10.0)),
                      base_pose: RigidPose | None = None) -> Trajectory:
    """Seeded uniform orientations (quaternion method) with translations
    drawn inside ``box`` (mm, relative to the base pose)."""
    if n < 1:
        raise InvalidScheme("random trajectory needs n >= 1")
    base = base_pose or RigidPose.identity()
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(box[0]), np.asarray(box[1])
    poses = []
    for _ in range(n):
        jitter = make_pose(_uniform_rotation(rng), rng.uniform(lo, hi))
        poses.append(compose(base, jitter))
    return Trajectory(poses=tuple(poses), scheme=f"random(seed={seed},n={n})",
                      seed=seed)


def fixed_trajectory(poses) -> Trajectory:
    return Trajectory(poses=tuple(poses), scheme=f"fixed({len(tuple(poses))})")


def make_trajectory(spec: str, base_pose: RigidPose | None = None) -> Trajectory:
    """Parse a CLI-style scheme string.

    ``handle:78`` -> 78 handle rotations; ``random:SEED:N`` -> N random
    poses from SEED.
    """
    parts = spec.split(":")
    try:
        if parts[0] == "handle" and len(parts) == 2:
            return handle_rotations(int(parts[1]), base_pose)
        if parts[0] == "random" and len(parts) == 3:
            return random_trajectory(int(parts[1]), int(parts[2]),
                                     base_pose=base_pose)
    except ValueError as exc:
        raise InvalidScheme(f"bad trajectory spec {spec!r}: {exc}") from exc
    raise InvalidScheme(
        f"unknown trajectory spec {spec!r} (try handle:78 or random:7:50)")


# --- reports ----------------------------------------------------------------------

def _hardware_label() -> str:
    cpu = platform.processor() or platform.machine() or "cpu"
    return f"{platform.system().lower()}-{cpu}-{os.cpu_count()}c"


@dataclass(frozen=True)
class BenchReport:
    label: str
    runs: tuple
    stats: StageStats
    warmup: int
    complete: bool
    config: dict = field(default_factory=dict)
    generated_at: float = 0.0

    def recomputed_stats(self) -> StageStats:
        return stage_stats(list(self.runs))


def run_bench(cfg: SessionConfig, traj: Trajectory, runs: int = 50,
              warmup: int = 5, *,
              mesh: SurfaceMesh | None = None,
              predictor: Predictor | None = None,
              label: str | None = None) -> BenchReport:
    """Drive the session loop over the trajectory, one awaited pose per
    run.

    ``warmup`` extra leading runs are executed and excluded from the
    statistics so first-call overhead does not pollute them. A predictor
    failure aborts and flags the report incomplete.
    """
    if runs < 1:
        raise InvalidScheme("runs must be >= 1")
    if mesh is None:
        mesh, _ = load_assets(cfg)
    if predictor is None:
        predictor = build_predictor(cfg)
    session = Session(predictor, mesh=mesh, field_out=cfg.field_out,
                      colormap_range=cfg.colormap_range,
                      stats_window=cfg.stats_window)
    complete = True
    baseline = 0
    try:
        try:
            for i in range(warmup):
                session.submit_and_wait(traj.poses[i % len(traj)], timeout=120.0)
        except NavfieldError:
            complete = False
        baseline = len(session.timings())
        if complete:
            for i in range(runs):
                pose = traj.poses[(warmup + i) % len(traj)]
                try:
                    session.submit_and_wait(pose, timeout=120.0)
                except NavfieldError:
                    complete = False
                    break
    finally:
        session.stop()
    timed = session.timings()[baseline:]
    label = label or _hardware_label()
    snapshot = {
        "backend": cfg.backend,
        "grid_dims": list(cfg.grid.dims),
        "segments_per_wing": cfg.coil.segments_per_wing,
        "mesh_vertices": mesh.n_vertices,
        "trajectory": traj.scheme,
        "requested_runs": runs,
        "warmup": warmup,
    }
    return BenchReport(label=label, runs=tuple(timed),
                       stats=stage_stats(timed), warmup=warmup,
                       complete=complete and len(timed) == runs,
                       config=snapshot, generated_at=time.time())


def _cell(mean: float, std: float) -> str:
    return f"{mean:.5f}±{std:.5f}"


def render_report(r: BenchReport, fmt: str = "markdown") -> str:
    """Render the per-stage statistics table.

    Markdown and CSV carry identical numeric strings (5 decimal places,
    mean and std separated by a plus-minus sign).
    """
    s = r.stats
    cells = {
        "predict": _cell(s.compute_mean, s.compute_std),
        "vis": _cell(s.vis_mean, s.vis_std),
        "total": f"{s.total_mean:.5f}",
    }
    if fmt == "markdown":
        lines = [
            "| Config | Runs | Predict Mean[s]±std | Vis. Mean[s]±std | Total Mean[s] |",
            "|---|---|---|---|---|",
            f"| {r.label} | {s.n} | {cells['predict']} | {cells['vis']} "
            f"| {cells['total']} |",
        ]
        if not r.complete:
            lines.append("")
            lines.append(f"**INCOMPLETE**: {s.n} of "
                         f"{r.config.get('requested_runs', '?')} runs recorded.")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        lines = [
            "config,runs,predict_mean_std_s,vis_mean_std_s,total_mean_s,complete",
            f"{r.label},{s.n},{cells['predict']},{cells['vis']},"
            f"{cells['total']},{str(r.complete).lower()}",
        ]
        return "\n".join(lines) + "\n"
    raise InvalidScheme(f"unknown report format {fmt!r}")


def report_to_json(r: BenchReport) -> str:
    return json.dumps({
        "label": r.label,
        "complete": r.complete,
        "warmup": r.warmup,
        "config": r.config,
        "generated_at": r.generated_at,
        "stats": {
            "n": r.stats.n,
            "compute_mean": r.stats.compute_mean,
            "compute_std": r.stats.compute_std,
            "vis_mean": r.stats.vis_mean,
            "vis_std": r.stats.vis_std,
        },
        "runs": [
            {
                "run_id": t.run_id,
                "compute_s": t.compute_s,
                "vis_s": t.vis_s,
                "started_at": t.started_at,
                "finished_at": t.finished_at,
                "matrix": t.pose.matrix.reshape(-1).tolist(),
            }
            for t in r.runs
        ],
    }, indent=2)


def render_figures(r: BenchReport, out_dir, stem: str = "bench") -> list[str]:
    """Write the benchmark figures as PNG files next to the report: the
    per-run stage timings and the stage mean±std bars. Returns the paths."""
    from pathlib import Path

    from matplotlib.figure import Figure

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []

    ids = np.arange(1, len(r.runs) + 1)
    comp = np.array([t.compute_s for t in r.runs])
    vis = np.array([t.vis_s for t in r.runs])

    fig = Figure(figsize=(7, 3.2), dpi=120)
    ax = fig.subplots()
    ax.plot(ids, comp, lw=1.2, marker=".", ms=3, label="predict")
    ax.plot(ids, vis, lw=1.2, marker=".", ms=3, label="vis")
    ax.plot(ids, comp + vis, lw=1.0, ls="--", color="gray", label="total")
    ax.set_xlabel("run")
    ax.set_ylabel("seconds")
    ax.set_title(f"per-run stage timings ({r.label})")
    ax.legend(frameon=False, fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    p = out_dir / f"{stem}_runs.png"
    fig.savefig(p)
    paths.append(str(p))

    s = r.stats
    fig = Figure(figsize=(4.2, 3.2), dpi=120)
    ax = fig.subplots()
    names = ["predict", "vis", "total"]
    means = [s.compute_mean, s.vis_mean, s.total_mean]
    stds = [s.compute_std, s.vis_std, float(np.std(comp + vis)) if len(ids) else 0.0]
    ax.bar(names, means, yerr=stds, capsize=4,
           color=["#4878cf", "#e8a33d", "#999999"])
    ax.set_ylabel("seconds")
    ax.set_title(f"mean over {s.n} runs")
    ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    p = out_dir / f"{stem}_stats.png"
    fig.savefig(p)
    paths.append(str(p))
    return paths
