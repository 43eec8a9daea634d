import math

import numpy as np
import pytest
from pydantic import ValidationError

from mitfas.errors import ConfigurationError, FrameFormatError, OutOfRangeError
from mitfas.transforms import (
    BBox,
    TransformParams,
    enlarge_box,
    extract_patch,
    make_reference,
    params_for_center,
    to_grayscale,
    window_center,
)


class TestTypes:
    def test_theta_range(self):
        TransformParams(theta=math.pi)
        with pytest.raises(ValidationError):
            TransformParams(theta=-math.pi)

    def test_scale_positive(self):
        with pytest.raises(ValidationError):
            TransformParams(scale=0.0)

    def test_bbox_positive_size(self):
        with pytest.raises(ValidationError):
            BBox(x=0, y=0, w=0, h=5)

    def test_bbox_clamp(self):
        assert BBox(x=-5, y=90, w=20, h=20).clamp(100, 100) == BBox(x=0, y=90, w=15, h=10)
        with pytest.raises(OutOfRangeError):
            BBox(x=200, y=0, w=10, h=10).clamp(100, 100)


class TestGrayscale:
    def test_bt601_weights(self):
        rgb = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 255]]], dtype=np.uint8)
        assert to_grayscale(rgb).tolist() == [[76, 150, 29, 255]]

    def test_gray_passthrough(self, textured_frame):
        assert to_grayscale(textured_frame) is textured_frame

    def test_four_channels_rejected(self):
        with pytest.raises(FrameFormatError):
            to_grayscale(np.zeros((4, 4, 4), dtype=np.uint8))


class TestExtractPatch:
    def test_identity_is_a_crop(self, textured_frame):
        params = TransformParams(displacement=(10.0, 5.0))
        patch = extract_patch(textured_frame, params, 20, 15)
        np.testing.assert_array_equal(patch, textured_frame[5:20, 10:30])

    def test_quarter_turn(self):
        frame = np.arange(9, dtype=np.uint8).reshape(3, 3)
        params = TransformParams(theta=math.pi / 2, displacement=(2.0, 0.0))
        np.testing.assert_array_equal(extract_patch(frame, params, 3, 3), np.rot90(frame))

    def test_half_pixel_interpolates(self):
        frame = np.array([[0, 100], [0, 100]], dtype=np.uint8)
        patch = extract_patch(frame, TransformParams(displacement=(0.5, 0.0)), 1, 2)
        assert patch.ravel().tolist() == [50, 50]

    def test_border_clamps(self):
        frame = np.array([[10, 20], [30, 40]], dtype=np.uint8)
        patch = extract_patch(frame, TransformParams(displacement=(-0.5, -0.5)), 2, 2)
        assert patch[0, 0] == 10

    def test_upscale_of_constant_stays_constant(self):
        frame = np.full((40, 40), 77, dtype=np.uint8)
        patch = extract_patch(frame, TransformParams(displacement=(5.0, 5.0), scale=1.5), 10, 10)
        assert np.all(patch == 77)

    def test_center_outside_frame(self, textured_frame):
        with pytest.raises(OutOfRangeError):
            extract_patch(textured_frame, TransformParams(displacement=(100.0, 100.0)), 10, 10)

    def test_center_helpers_are_inverse(self):
        params = params_for_center((40.0, 30.0), 20, 10, 1.1, 0.3)
        cx, cy = window_center(params, 20, 10)
        assert (cx, cy) == (pytest.approx(40.0), pytest.approx(30.0))


class TestReference:
    def test_enlarge_default_ratios(self):
        assert enlarge_box(BBox(x=100, y=100, w=40, h=80)) == BBox(x=98, y=84, w=44, h=100)

    def test_enlarge_rejects_shrinking(self):
        with pytest.raises(ConfigurationError):
            enlarge_box(BBox(x=0, y=0, w=10, h=10), width_ratio=0.9)

    def test_custom_ratios(self):
        assert enlarge_box(BBox(x=50, y=50, w=20, h=20), 1.5, 1.5, 0.0) == BBox(x=45, y=45, w=30, h=30)

    def test_reference_clamped_at_corner(self, textured_frame):
        ref = make_reference(textured_frame, BBox(x=0, y=0, w=20, h=20))
        assert ref.box == BBox(x=0, y=0, w=21, h=21)
        assert ref.size == (21, 21)
        np.testing.assert_array_equal(ref.patch, textured_frame[:21, :21])

    def test_reference_origin(self, textured_frame):
        ref = make_reference(textured_frame, BBox(x=30, y=20, w=10, h=20), frame_index=3)
        assert ref.source_frame_index == 3
        assert ref.origin_params.displacement == (float(ref.box.x), float(ref.box.y))
