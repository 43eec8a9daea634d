import json

import pytest

from mitfas.main import build_parser, main
from mitfas.settings import THREADS_ENV


@pytest.fixture(autouse=True)
def no_threads_env(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)


def synth_args(out, frames=12, path="linear:2,0"):
    return ["synth", "--out", str(out), "--frames", str(frames), "--size", "160x120",
            "--sprite", "24x32", "--path", path, "--seed", "7"]


def align_args(fixture, out, *extra):
    return ["align", "--frames", str(fixture), "--bboxes", str(fixture / "bboxes.txt"), "--out", str(out),
            "--stride", "2", "--scales", "1.0", "--bins", "32", "--n-frames", "4", *extra]


class TestParser:
    def test_flags_default_to_unset(self):
        args = build_parser().parse_args(["align", "--frames", "f", "--bboxes", "b", "--out", "o"])
        assert args.bins is None and args.sample_raw is None
        assert args.refine is None

    def test_refine_switch(self):
        base = ["align", "--frames", "f", "--bboxes", "b", "--out", "o"]
        assert build_parser().parse_args([*base, "--no-refine"]).refine is False
        assert build_parser().parse_args([*base, "--refine"]).refine is True

    def test_lists(self):
        args = build_parser().parse_args(["align", "--frames", "f", "--bboxes", "b", "--out", "o",
                                          "--scales", "0.8,1.2", "--thetas", "0,0.1"])
        assert args.scales == [0.8, 1.2] and args.thetas == [0.0, 0.1]


class TestCommands:
    def test_synth_then_align(self, tmp_path, capsys):
        fixture = tmp_path / "fx"
        assert main(synth_args(fixture)) == 0
        assert len(list(fixture.glob("frame_*.pgm"))) == 12
        assert json.loads((fixture / "ground_truth.json").read_text())[0]["frame_index"] == 0

        assert main(align_args(fixture, tmp_path / "out", "--seed", "2", "--measure", "ssim")) == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["measure"] == "ssim"
        assert manifest["config"]["seed"] == 2
        truth = json.loads((fixture / "ground_truth.json").read_text())
        for record, box in zip(manifest["trace"]["records"], truth):
            assert record["params"]["displacement"] == [box["x"] - 1, box["y"] - 6]
        assert "sampled" in capsys.readouterr().out

    def test_config_file_with_flag_override(self, tmp_path):
        fixture = tmp_path / "fx"
        main(synth_args(fixture, frames=6))
        config = tmp_path / "run.yaml"
        config.write_text("alpha: 0.25\nn_frames: 3\n")
        assert main(align_args(fixture, tmp_path / "out", "--config", str(config))) == 0
        snapshot = json.loads((tmp_path / "out" / "manifest.json").read_text())["config"]
        assert snapshot["alpha"] == 0.25 and snapshot["n_frames"] == 4


class TestExitCodes:
    def test_configuration_error(self, tmp_path):
        fixture = tmp_path / "fx"
        main(synth_args(fixture, frames=6))
        config = tmp_path / "run.yaml"
        config.write_text("unknown_key: 1\n")
        assert main(align_args(fixture, tmp_path / "out", "--config", str(config))) == 2

    def test_input_error(self, tmp_path):
        assert main(align_args(tmp_path / "missing", tmp_path / "out")) == 3

    def test_runtime_error(self, tmp_path):
        assert main(synth_args(tmp_path / "fx", frames=60, path="linear:5,0")) == 4
