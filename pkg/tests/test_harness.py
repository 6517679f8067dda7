import json
import os
import subprocess
import sys

import numpy as np
import pytest

from vql import fileio, metrics
from vql.cli import main as cli_main
from vql.fusion import SegmentationResult, TemporalInterval
from vql.pipeline import PipelineConfig, TrackOutput
from vql.scenario import (
    PRESETS,
    ScenarioParams,
    gen_scenario,
    ground_truth_track,
    preset_params,
)


def small_identity(n_frames=3):
    return gen_scenario(5, ScenarioParams("identity", n_frames=n_frames, canvas=(32, 32), object_size=13))


class TestGenScenario:
    def test_identity_gt_constant(self):
        sc = gen_scenario(1, preset_params("identity"))
        first = sc.frames[0].gt_mask
        assert all(np.array_equal(f.gt_mask, first) for f in sc.frames)
        assert sc.gt_interval == (0, len(sc.frames) - 1)

    def test_same_seed_identical(self):
        a = gen_scenario(2, preset_params("drift"))
        b = gen_scenario(2, preset_params("drift"))
        for fa, fb in zip(a.frames, b.frames):
            assert np.array_equal(fa.feature, fb.feature)

    def test_absence_interval_is_last_run(self):
        sc = gen_scenario(3, preset_params("absence"))
        a0, a1 = sc.params.absence
        assert sc.gt_interval == (a1 + 1, sc.params.n_frames - 1)
        assert not sc.frames[a0].gt_mask.any()
        assert sc.frames[a1 + 1].gt_mask.any()

    def test_all_presets_generate(self):
        for name in PRESETS:
            sc = gen_scenario(4, preset_params(name))
            assert len(sc.frames) == sc.params.n_frames

    def test_geo_has_3d_ground_truth(self):
        sc = gen_scenario(5, preset_params("geo"))
        assert sc.gt_point is not None
        assert sc.alignment_src.shape[0] >= 3
        assert all(f.camera is not None for f in sc.frames)

    def test_invalid_params(self):
        from vql.core import ParameterError

        with pytest.raises(ParameterError):
            gen_scenario(0, ScenarioParams("identity", n_frames=0))
        with pytest.raises(ParameterError):
            gen_scenario(0, ScenarioParams("identity", n_frames=2, canvas=(4, 4)))


class TestFileRoundTrips:
    def test_scenario_round_trip_bytes(self, tmp_path):
        sc = small_identity()
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        fileio.save_scenario(sc, str(a))
        fileio.save_scenario(fileio.load_scenario(str(a)), str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_geo_scenario_round_trip(self, tmp_path):
        sc = gen_scenario(6, preset_params("geo"))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        fileio.save_scenario(sc, str(a))
        loaded = fileio.load_scenario(str(a))
        fileio.save_scenario(loaded, str(b))
        assert a.read_bytes() == b.read_bytes()
        np.testing.assert_array_equal(loaded.gt_point, sc.gt_point)

    def test_track_round_trip(self, tmp_path):
        track = ground_truth_track(small_identity())
        path = tmp_path / "t.json"
        fileio.save_track(track, str(path))
        loaded = fileio.load_track(str(path))
        assert loaded.interval == track.interval
        for a, b in zip(loaded.results, track.results):
            np.testing.assert_array_equal(a.prob, b.prob)
            np.testing.assert_array_equal(a.mask, b.mask)
            assert a.bbox == b.bbox

    def test_config_round_trip(self, tmp_path):
        cfg = PipelineConfig(admit_threshold=0.7, capacity=20)
        path = tmp_path / "c.json"
        fileio.save_config(cfg, str(path))
        assert fileio.load_config(str(path)) == cfg

    def test_schema_errors_name_fields(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"version": 1, "kind": "config", "admit_threshold": 7}')
        with pytest.raises(fileio.SchemaError, match="admit_threshold"):
            fileio.load_config(str(path))
        path.write_text('{"version": 2, "kind": "scenario"}')
        with pytest.raises(fileio.SchemaError, match="version"):
            fileio.load_scenario(str(path))
        path.write_text("not json")
        with pytest.raises(fileio.SchemaError, match="JSON"):
            fileio.load_scenario(str(path))


class TestEval2d:
    def test_ground_truth_scores_perfectly(self):
        sc = small_identity(n_frames=8)
        report = metrics.eval_2d(ground_truth_track(sc), sc)
        assert report == metrics.MetricsReport2D(1.0, 1.0, 100.0, 100.0)

    def test_no_interval_scores_zero(self):
        sc = small_identity(n_frames=8)
        track = ground_truth_track(sc)
        track.interval = None
        report = metrics.eval_2d(track, sc)
        assert report == metrics.MetricsReport2D(0.0, 0.0, 0.0, 0.0)

    def test_half_overlap_hand_case(self):
        sc = gen_scenario(7, preset_params("identity"))
        shifted_gt = type(sc)(
            seed=sc.seed, params=sc.params, frames=sc.frames, query=sc.query, gt_interval=(24, 47)
        )
        base = ground_truth_track(sc)
        results = [
            SegmentationResult(
                r.prob, r.mask, r.bbox if 12 <= r.frame_index <= 35 else None, r.s_conf, r.frame_index
            )
            for r in base.results
        ]
        pred = TrackOutput(results, TemporalInterval(12, 35), base.peaks)
        assert metrics.temporal_iou((12, 35), (24, 47)) == pytest.approx(1 / 3)
        report = metrics.eval_2d(pred, shifted_gt)
        assert report.t_ap25 == 1.0
        assert report.recovery_pct == pytest.approx(50.0)

    def test_box_iou(self):
        assert metrics.box_iou((0, 0, 9, 9), (0, 0, 9, 9)) == 1.0
        assert metrics.box_iou((0, 0, 4, 4), (5, 5, 9, 9)) == 0.0
        assert metrics.box_iou((0, 0, 9, 9), (5, 0, 14, 9)) == pytest.approx(50 / 150)


class TestEval3d:
    def test_ground_truth_scores_perfectly(self):
        from vql.pipeline import finalize_3d

        sc = gen_scenario(8, preset_params("geo"))
        track = finalize_3d(ground_truth_track(sc), sc.cameras, (sc.alignment_src, sc.alignment_dst))
        report = metrics.eval_3d(track, sc)
        assert report.success_pct == 100.0
        assert report.success_star_pct == 100.0
        assert report.l2 < 1e-9
        assert report.angle < 1e-6
        assert report.qwp_pct == 100.0

    def test_opposite_displacement_is_pi(self):
        from vql.pipeline import finalize_3d

        sc = gen_scenario(8, preset_params("geo"))
        track = finalize_3d(ground_truth_track(sc), sc.cameras, (sc.alignment_src, sc.alignment_dst))
        flipped = TrackOutput(
            track.results,
            track.interval,
            track.peaks,
            track.world_point,
            {t: -d for t, d in track.displacements.items()},
        )
        report = metrics.eval_3d(flipped, sc)
        assert report.angle == pytest.approx(np.pi)
        assert report.success_pct == 0.0

    def test_perturbation_l2(self):
        from vql.pipeline import finalize_3d

        sc = gen_scenario(8, preset_params("geo"))
        track = finalize_3d(ground_truth_track(sc), sc.cameras, (sc.alignment_src, sc.alignment_dst))
        eps = np.array([0.03, -0.04, 0.12])
        shifted = TrackOutput(
            track.results,
            track.interval,
            track.peaks,
            track.world_point,
            {t: d + eps for t, d in track.displacements.items()},
        )
        report = metrics.eval_3d(shifted, sc)
        assert report.l2 == pytest.approx(float(np.linalg.norm(eps)), rel=1e-9)


class TestCli:
    def run_cli(self, *args):
        return cli_main(list(args))

    def test_gen_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert self.run_cli("gen", "--seed", "7", "--preset", "identity", "--out", str(a)) == 0
        assert self.run_cli("gen", "--seed", "7", "--preset", "identity", "--out", str(b)) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_unknown_preset_is_validation_error(self, tmp_path):
        with pytest.raises(SystemExit) as err:
            self.run_cli("gen", "--seed", "1", "--preset", "nope", "--out", str(tmp_path / "x.json"))
        assert err.value.code == 2

    def test_missing_file_is_validation_error(self, tmp_path):
        code = self.run_cli(
            "run2d", "--scenario", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o.json")
        )
        assert code == 2

    def test_selfcheck_filter(self, capsys):
        assert self.run_cli("selfcheck", "--filter", "core.median") == 0
        out = capsys.readouterr().out
        assert "core.median_filter_sort_oracle" in out and "PASS" in out

    def test_selfcheck_unknown_filter(self):
        assert self.run_cli("selfcheck", "--filter", "nonexistent.check") == 2

    def test_eval_json_output(self, tmp_path, capsys):
        scenario_path = tmp_path / "s.json"
        track_path = tmp_path / "t.json"
        sc = small_identity(n_frames=4)
        fileio.save_scenario(sc, str(scenario_path))
        fileio.save_track(ground_truth_track(sc), str(track_path))
        code = self.run_cli(
            "eval", "--scenario", str(scenario_path), "--track", str(track_path), "--json"
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["stAP25"] == 1.0

    def test_run2d_run3d_eval_chain(self, tmp_path, capsys):
        scenario_path = tmp_path / "geo.json"
        sc = gen_scenario(11, preset_params("geo"))
        fileio.save_scenario(sc, str(scenario_path))
        track_path = tmp_path / "track.json"
        fileio.save_track(ground_truth_track(sc), str(track_path))
        out3d = tmp_path / "track3d.json"
        code = self.run_cli(
            "run3d", "--scenario", str(scenario_path), "--track", str(track_path), "--out", str(out3d)
        )
        assert code == 0
        code = self.run_cli(
            "eval", "--scenario", str(scenario_path), "--track", str(out3d), "--metrics-3d", "--json"
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert payload["3d_l2"] < 1e-9
        assert payload["3d_qwp_pct"] == 100.0

    def test_console_script_entry_point(self, tmp_path):
        env = dict(os.environ, EAGLE_THREADS="2")
        proc = subprocess.run(
            [sys.executable, "-m", "vql.cli", "selfcheck", "--filter", "core.conv2d"],
            capture_output=True,
            text=True,
            env=env,
        )
        assert proc.returncode == 0
        assert "PASS" in proc.stdout
