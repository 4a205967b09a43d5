"""End-to-end pipeline runs and CLI surface."""
import json

import numpy as np
import pytest

from monogp.cli import main
from monogp.pipeline import PipelineError, run_ablation, run_pipeline
from monogp.scenarios import default_corridor, nonoverlap
from monogp.simulate import TrajectorySpec, ScenarioConfig


def test_corridor_lp_converges_with_finite_ate():
    result = run_pipeline(default_corridor(), "lp")
    assert result.metrics["converged"]
    assert np.isfinite(result.metrics["ate_rmse_m"])
    assert result.metrics["mode"] == "lp"
    assert set(result.metrics) == {"scenario", "mode", "seed", "ate_rmse_m",
                                   "initial_ate_m", "iters", "converged",
                                   "n_gps", "cost_breakdown"}


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        run_pipeline(default_corridor(), "both")


def test_gp_without_line_families_degenerates_to_lp():
    cfg = ScenarioConfig(name="pointsonly", rng_seed=0, n_points=80,
                         direction_families=[],
                         trajectory=TrajectorySpec("corridor", 8, 0.25))
    lp = run_pipeline(cfg, "lp")
    gp = run_pipeline(cfg, "gp")
    assert gp.metrics["n_gps"] == 0
    assert abs(lp.metrics["ate_rmse_m"] - gp.metrics["ate_rmse_m"]) < 1e-9


def test_nonoverlap_association_edge_between_disjoint_frames():
    result = run_pipeline(nonoverlap(), "gp")
    graph = result.registry.association_graph()
    frames = result.config.trajectory.n_keyframes
    windows = result.config.visibility.partition_windows
    # frames before the second window opens vs after the first closes
    early = range(0, windows[1][0])
    late = range(windows[0][1], frames)
    assert any(graph.has_edge(a, b) for a in early for b in late)


def test_ablation_report_arithmetic():
    report = run_ablation(default_corridor(), 2)
    assert not report.failures
    recomputed = (1.0 - report.mean_ate_gp / report.mean_ate_lp) * 100.0
    assert abs(report.reduction_pct - recomputed) < 1e-12
    parsed = json.loads(report.to_json())
    assert len(parsed["per_seed"]) == 2
    csv_text = report.to_csv()
    assert csv_text.splitlines()[0] == "seed,ate_lp,ate_gp"


# -- CLI ------------------------------------------------------------------------

@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "scenario.json"
    default_corridor().save(path)
    return path


def test_cli_simulate(tmp_path, config_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", str(config_path),
                 "--out", str(out)]) == 0
    assert (out / "observations.jsonl").exists()
    assert (out / "groundtruth.tum").exists()


def test_cli_run_and_eval(tmp_path, config_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--config", str(config_path), "--mode", "lp",
                 "--out", str(out)]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["mode"] == "lp"
    assert (out / "report.json").exists()
    assert (out / "gate_audit.csv").exists()
    capsys.readouterr()
    assert main(["eval", str(out / "estimated.tum"),
                 str(out / "groundtruth.tum")]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["ate_rmse_m"] < 1e-9


def test_cli_run_gp_writes_registry(tmp_path, config_path):
    out = tmp_path / "rungp"
    assert main(["run", "--config", str(config_path), "--mode", "gp",
                 "--out", str(out)]) == 0
    registry = json.loads((out / "registry.json").read_text())
    assert len(registry) == 3  # clean scene: one GP per planted family


def test_cli_detect_vp(tmp_path, capsys):
    from monogp.segments import Segment2D, save_segments
    rng = np.random.default_rng(0)
    segs = []
    for i in range(15):
        a = rng.uniform([50.0, 50.0], [400.0, 400.0])
        u = np.array([900.0, 300.0]) - a
        u /= np.linalg.norm(u)
        segs.append(Segment2D(a, a + 60.0 * u, id=i))
    path = tmp_path / "segs.txt"
    save_segments(segs, path)
    assert main(["detect-vp", "--segments", str(path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out) == 1
    vp = np.array(out[0]["vp"])
    px = vp[:2] / vp[2]
    assert np.allclose(px, [900.0, 300.0], atol=1e-6)


def test_cli_missing_file_is_stage_error(tmp_path):
    assert main(["run", "--config", str(tmp_path / "nope.json"),
                 "--mode", "lp"]) == 1


def test_cli_bad_arguments_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--mode", "sideways"])
    assert exc.value.code == 2
