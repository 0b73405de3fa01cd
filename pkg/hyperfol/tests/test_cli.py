"""
End-to-end tests of the command-line entry point
"""
import os

import pytest
import yaml

from commands.evolve import structure_gate
from main import build_parser, main
from models.run import RunConfig
from services.presets import get_preset
from storage.run_store import RunStore
from tests.test_utils import SAMPLE_BLOWUP_SPEC, SAMPLE_BREAKDOWN_SPEC, SAMPLE_NONNULL_WAVE_SPEC

FREE_WAVE_RUN = {
    "s0": 2.0,
    "s_end": 2.3,
    "zi_order": 0,
    "cadence": 1,
    "spec": {"name": "free-wave", "n0": 1, "j0": 1, "masses": [0.0], "components": ["u"]},
    "initial_data": {"components": [{"value": {"kind": "bump", "amplitude": 1.0, "radius": 1.2, "power": 4}}]},
}


def _write_yaml(directory, name, document):
    target = directory / name
    target.write_text(yaml.safe_dump(document))
    return str(target)


def test_parser_rejects_unknown_command():
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["simulate"])
    assert info.value.code == 2


def test_parser_evolve_flags():
    args = build_parser().parse_args(["evolve", "--preset", "wkg", "--resolution", "0.5", "--zi-order", "1",
                                      "--force"])
    assert args.preset == "wkg"
    assert args.resolution == 0.5
    assert args.zi_order == 1
    assert args.force
    assert args.s_end is None
    assert build_parser().parse_args(["evolve", "--s-end", "4"]).s_end == 4.0


def test_analyze_null_wave_preset(tmp_path):
    out = str(tmp_path / "analyze")
    assert main(["analyze", "--preset", "null-wave", "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "structure.yaml"))
    assert os.path.exists(os.path.join(out, "structure.txt"))


def test_analyze_blowup_spec_fails(tmp_path):
    spec = _write_yaml(tmp_path, "spec.yaml", SAMPLE_BLOWUP_SPEC)
    out = str(tmp_path / "analyze")
    assert main(["analyze", "--spec", spec, "--out", out]) == 1
    report = RunStore.read_yaml(os.path.join(out, "structure.yaml"))
    assert report["passed"] is False


def test_analyze_malformed_spec(tmp_path):
    spec = tmp_path / "broken.yaml"
    spec.write_text("n0: [1\n")
    assert main(["analyze", "--spec", str(spec), "--out", str(tmp_path / "out")]) == 2


def test_analyze_without_a_source(output_dir):
    assert main(["analyze"]) == 2


def test_operators_command(output_dir):
    assert main(["operators"]) == 0
    document = RunStore.read_yaml(os.path.join(output_dir, "operators.yaml"))
    assert len(document["commutators"]) == 56
    assert document["q0_frame_bound"]["constant"] == pytest.approx(1.0)


def test_verify_frames(tmp_path):
    out = str(tmp_path / "verify")
    assert main(["verify", "--selection", "frames", "--seed", "3", "--out", out]) == 0
    report = RunStore.read_yaml(os.path.join(out, "verification.yaml"))
    assert report["selection"] == "frames"


def test_structure_gate(tmp_path):
    store = RunStore(str(tmp_path))
    solver = get_preset("nonnull-wave")
    assert structure_gate(RunConfig(command="evolve", preset="nonnull-wave"), solver, store)

    config = RunConfig(command="evolve", config_path=str(tmp_path / "run.yaml"))
    assert not structure_gate(config, solver, store)
    assert structure_gate(RunConfig(**{**config.dict(), "force": True}), solver, store)
    assert os.path.exists(store.path("structure.yaml"))


def test_evolve_refuses_failing_structure(tmp_path):
    config = _write_yaml(tmp_path, "run.yaml", {**FREE_WAVE_RUN, "spec": SAMPLE_NONNULL_WAVE_SPEC})
    out = str(tmp_path / "evolve")
    assert main(["evolve", "--config", config, "--resolution", "0.25", "--out", out]) == 1
    assert not os.path.exists(os.path.join(out, "summary.yaml"))


def test_evolve_short_run(tmp_path):
    config = _write_yaml(tmp_path, "run.yaml", FREE_WAVE_RUN)
    out = str(tmp_path / "evolve")
    assert main(["evolve", "--config", config, "--resolution", "0.25", "--out", out]) == 0
    summary = RunStore.read_yaml(os.path.join(out, "summary.yaml"))
    assert summary["status"] == "completed"
    assert summary["config"]["h"] == 0.25
    assert summary["final_s"] == pytest.approx(2.3)
    columns, data = RunStore.read_table(os.path.join(out, "energy.csv"))
    assert columns[:2] == ["s", "E[u]"]
    assert data.shape[0] >= 2
    assert os.path.exists(os.path.join(out, "decay.csv"))


def test_evolve_reports_breakdown(tmp_path):
    config = _write_yaml(tmp_path, "run.yaml", {**FREE_WAVE_RUN, "spec": SAMPLE_BREAKDOWN_SPEC})
    out = str(tmp_path / "evolve")
    assert main(["evolve", "--config", config, "--resolution", "0.25", "--force", "--out", out]) == 3
    summary = RunStore.read_yaml(os.path.join(out, "summary.yaml"))
    assert summary["status"] == "quasilinear-breakdown"
    assert summary["exit_code"] == 3
    assert summary["steps"] == 0
    assert summary["verdicts"] == {}
    assert not os.path.exists(os.path.join(out, "energy.csv"))


def test_evolve_default_preset_exceeds_max_n(tmp_path):
    assert main(["evolve", "--preset", "linear-kg", "--out", str(tmp_path / "evolve")]) == 2
