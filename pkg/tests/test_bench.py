import json
import re
import time

import numpy as np
import pytest

from navfield.bench import (
    BenchReport,
    Trajectory,
    fixed_trajectory,
    handle_rotations,
    make_trajectory,
    random_trajectory,
    render_figures,
    render_report,
    report_to_json,
    run_bench,
)
from navfield.engine import CoilParams
from navfield.errors import InvalidScheme, RemoteTimeout
from navfield.geometry import GridSpec, RigidPose, ScalarField
from navfield.server import SessionConfig
from navfield.volio import SurfaceMesh

from .test_server import MockPredictor, tiny_grid, tiny_mesh


def quick_cfg(**kw):
    base = dict(igtl_port=0, ws_port=0, grid=tiny_grid(),
                coil=CoilParams(segments_per_wing=4))
    base.update(kw)
    return SessionConfig(**base)


class TestTrajectories:
    def test_handle_rotation_count_and_spacing(self):
        traj = handle_rotations(78)
        assert len(traj) == 78
        step = np.deg2rad(360.0 / 78.0)
        for k in (0, 1, 39, 77):
            r = traj.poses[k].rotation
            angle = np.arctan2(r[1, 0], r[0, 0])
            expected = (k * step + np.pi) % (2 * np.pi) - np.pi
            assert abs(((angle - expected) + np.pi) % (2 * np.pi) - np.pi) < 1e-9

    def test_consecutive_spacing(self):
        traj = handle_rotations(78)
        step = np.deg2rad(360.0 / 78.0)
        for a, b in zip(traj.poses, traj.poses[1:5]):
            rel = a.rotation.T @ b.rotation
            angle = np.arctan2(rel[1, 0], rel[0, 0])
            assert abs(angle - step) < 1e-9

    def test_single_rotation(self):
        traj = handle_rotations(1)
        assert len(traj) == 1
        np.testing.assert_allclose(traj.poses[0].matrix, np.eye(4), atol=1e-12)

    def test_random_reproducible(self):
        a = random_trajectory(seed=7, n=20)
        b = random_trajectory(seed=7, n=20)
        for pa, pb in zip(a.poses, b.poses):
            np.testing.assert_array_equal(pa.matrix, pb.matrix)
        c = random_trajectory(seed=8, n=20)
        assert not np.array_equal(a.poses[0].matrix, c.poses[0].matrix)

    def test_fixed_passthrough(self):
        traj = fixed_trajectory([RigidPose.identity()])
        assert len(traj) == 1

    def test_spec_parsing(self):
        assert len(make_trajectory("handle:78")) == 78
        assert len(make_trajectory("random:3:11")) == 11
        with pytest.raises(InvalidScheme):
            make_trajectory("spiral:9")
        with pytest.raises(InvalidScheme):
            make_trajectory("handle:zero")
        with pytest.raises(InvalidScheme):
            handle_rotations(0)


class TestRunBench:
    def test_exact_run_count(self):
        cfg = quick_cfg()
        report = run_bench(cfg, handle_rotations(7), runs=12, warmup=2,
                           mesh=tiny_mesh(),
                           predictor=MockPredictor(cfg.grid))
        assert report.complete
        assert len(report.runs) == 12
        assert report.stats.n == 12

    def test_never_coalesces(self):
        cfg = quick_cfg()
        pred = MockPredictor(cfg.grid, delay_s=0.01)
        report = run_bench(cfg, handle_rotations(5), runs=20, warmup=0,
                           mesh=tiny_mesh(), predictor=pred)
        assert len(report.runs) == 20
        assert len(pred.calls) == 20

    def test_stats_recomputable(self):
        cfg = quick_cfg()
        report = run_bench(cfg, handle_rotations(3), runs=10, warmup=1,
                           mesh=tiny_mesh(), predictor=MockPredictor(cfg.grid))
        again = report.recomputed_stats()
        assert abs(again.compute_mean - report.stats.compute_mean) < 1e-12
        assert abs(again.vis_std - report.stats.vis_std) < 1e-12

    def test_warmup_excluded(self):
        cfg = quick_cfg()
        pred = MockPredictor(cfg.grid)
        report = run_bench(cfg, handle_rotations(4), runs=6, warmup=3,
                           mesh=tiny_mesh(), predictor=pred)
        assert len(pred.calls) == 9
        assert len(report.runs) == 6

    def test_failure_flags_incomplete(self):
        cfg = quick_cfg()

        class FailsAt5(MockPredictor):
            def predict(self, pose):
                if len(self.calls) >= 5:
                    raise RemoteTimeout("gone")
                return super().predict(pose)

        report = run_bench(cfg, handle_rotations(4), runs=30, warmup=0,
                           mesh=tiny_mesh(), predictor=FailsAt5(cfg.grid))
        assert not report.complete
        assert len(report.runs) == 5


def constant_report(compute=0.04028, vis=0.09336, n=50):
    from navfield.server import RunTiming, stage_stats

    runs = tuple(
        RunTiming(run_id=i + 1, pose=RigidPose.identity(), compute_s=compute,
                  vis_s=vis, started_at=float(i), finished_at=float(i) + 0.2)
        for i in range(n))
    return BenchReport(label="deskbox", runs=runs, stats=stage_stats(list(runs)),
                       warmup=5, complete=True,
                       config={"requested_runs": n}, generated_at=time.time())


class TestRenderReport:
    def test_markdown_single_row(self):
        text = render_report(constant_report(), "markdown")
        lines = [l for l in text.splitlines() if l.startswith("|")]
        assert len(lines) == 3  # header, rule, one data row
        assert "deskbox" in lines[2]

    def test_cell_format_five_decimals(self):
        text = render_report(constant_report(), "markdown")
        assert "0.04028±0.00000" in text
        assert "0.09336±0.00000" in text

    def test_csv_and_markdown_numbers_identical(self):
        report = constant_report(compute=0.123456789, vis=0.04)
        md = render_report(report, "markdown")
        csv = render_report(report, "csv")
        md_nums = set(re.findall(r"\d+\.\d{5}", md))
        csv_nums = set(re.findall(r"\d+\.\d{5}", csv))
        assert md_nums == csv_nums

    def test_incomplete_marked(self):
        report = constant_report(n=10)
        report = BenchReport(label=report.label, runs=report.runs,
                             stats=report.stats, warmup=5, complete=False,
                             config={"requested_runs": 50},
                             generated_at=report.generated_at)
        assert "INCOMPLETE" in render_report(report, "markdown")
        assert "false" in render_report(report, "csv")

    def test_unknown_format(self):
        with pytest.raises(InvalidScheme):
            render_report(constant_report(), "xml")

    def test_json_dump(self):
        obj = json.loads(report_to_json(constant_report(n=3)))
        assert obj["stats"]["n"] == 3
        assert len(obj["runs"]) == 3
        assert len(obj["runs"][0]["matrix"]) == 16


class TestRenderFigures:
    def test_pngs_written(self, tmp_path):
        paths = render_figures(constant_report(n=12), tmp_path, stem="t")
        assert len(paths) == 2
        for p in paths:
            raw = open(p, "rb").read()
            assert raw[:8] == b"\x89PNG\r\n\x1a\n"
