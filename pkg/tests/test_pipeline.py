import json

import numpy as np
import pandas as pd
import pytest

from mitfas.errors import AnnotationValidationError, ConfigurationError
from mitfas.manifest_store import behavioral_fields, read_manifest
from mitfas.pipeline import run_pipeline
from mitfas.settings import build_config
from mitfas.tools.frame_io import decode_frame

FAST = {"stride": 2, "scales": "1.0", "bins": 32, "n_frames": 8}


def run(fixture_dir, out_dir, **overrides):
    config = build_config(overrides={**FAST, **overrides})
    return run_pipeline(fixture_dir, fixture_dir / "bboxes.txt", out_dir, config)


class TestRunPipeline:
    def test_outputs(self, fixture_dir, tmp_path):
        out = tmp_path / "out"
        manifest = run(fixture_dir, out)

        assert len(list((out / "aligned").glob("frame_*.pgm"))) == 32
        assert sorted(p.name for p in (out / "sampled").iterdir()) == [f"frame_{k:06d}.pgm" for k in manifest.sample.indices]
        assert len(manifest.sample.indices) == 8
        assert (out / "manifest.json").is_file() and (out / "mitfas.log").is_file()
        assert not any(p.name.startswith(".mitfas-staging") for p in out.iterdir())

        assert len(manifest.trace) == manifest.fingerprint.frame_count == 32
        assert set(manifest.timings) == {"load", "grayscale", "align", "sample", "write"}
        assert behavioral_fields(read_manifest(out / "manifest.json")) == behavioral_fields(manifest)
        assert len(pd.read_csv(out / "trace.csv")) == 32

    def test_tracks_ground_truth(self, fixture_dir, tmp_path):
        manifest = run(fixture_dir, tmp_path / "out")
        truth = json.loads((fixture_dir / "ground_truth.json").read_text())
        # the reference window is one pixel left of and six pixels above the sprite
        for record, box in zip(manifest.trace.records, truth):
            assert record.params.displacement == (box["x"] - 1, box["y"] - 6)

    def test_rerun_is_identical(self, fixture_dir, tmp_path):
        first = run(fixture_dir, tmp_path / "a", seed=4)
        second = run(fixture_dir, tmp_path / "b", seed=4)
        assert behavioral_fields(first) == behavioral_fields(second)
        for patch in (tmp_path / "a" / "aligned").iterdir():
            assert patch.read_bytes() == (tmp_path / "b" / "aligned" / patch.name).read_bytes()

    def test_raw_sampling_and_png(self, fixture_dir, tmp_path):
        out = tmp_path / "out"
        manifest = run(fixture_dir, out, sample_raw=True, patch_format="png", sampler="uniform")
        assert manifest.sample.method == "uniform"
        assert len(list((out / "sampled").glob("*.png"))) == 8
        for k in manifest.sample.indices:
            raw = decode_frame(fixture_dir / f"frame_{k:06d}.pgm")
            np.testing.assert_array_equal(decode_frame(out / "sampled" / f"frame_{k:06d}.png"), raw)

    def test_too_many_frames_requested(self, fixture_dir, tmp_path):
        out = tmp_path / "out"
        with pytest.raises(ConfigurationError):
            run(fixture_dir, out, n_frames=40)
        assert not out.exists()

    def test_failure_leaves_no_outputs(self, fixture_dir, tmp_path):
        (fixture_dir / "bboxes.txt").write_text("0,900,900,10,10\n")
        out = tmp_path / "out"
        with pytest.raises(AnnotationValidationError):
            run(fixture_dir, out)
        assert not out.exists()

    def test_failure_keeps_existing_directory_clean(self, fixture_dir, tmp_path):
        (fixture_dir / "bboxes.txt").write_text("0,900,900,10,10\n")
        out = tmp_path / "out"
        out.mkdir()
        (out / "keep.txt").write_text("mine")
        with pytest.raises(AnnotationValidationError):
            run(fixture_dir, out)
        assert sorted(p.name for p in out.iterdir()) == ["keep.txt"]
