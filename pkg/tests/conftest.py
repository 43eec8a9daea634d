# tests/conftest.py
import numpy as np
import pytest

from mitfas.synth import MotionSpec, generate_sequence, make_sprite, parse_path, write_fixture


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def textured_frame(rng):
    """80x60 uniform-noise frame; every placement of a window looks different."""
    return rng.integers(0, 256, size=(60, 80), dtype=np.uint8)


@pytest.fixture
def noise_patches(rng):
    return [rng.integers(0, 256, size=(12, 12), dtype=np.uint8) for _ in range(20)]


def synthetic_sequence(frames=8, size=(160, 120), path="linear:4,0", sprite=(24, 32), noise=0.0, seed=7):
    spec = MotionSpec(path=parse_path(path, frames, seed), noise_sigma=noise, seed=seed)
    return generate_sequence(size, make_sprite(*sprite, seed=seed), spec)


@pytest.fixture
def fixture_dir(tmp_path):
    """32-frame 160x120 fixture on disk: frames, bboxes.txt and ground_truth.json."""
    frames, boxes = synthetic_sequence(frames=32, path="linear:2,0")
    return write_fixture(tmp_path / "fixture", frames, boxes)
