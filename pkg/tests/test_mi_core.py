"""Unit tests for the histogram information measures."""

import numpy as np
import pytest

from mitfas.errors import (
    CapacityError,
    ConfigurationError,
    EmptyHistogramError,
    InputError,
    InvalidDistributionError,
    PreconditionError,
    ShapeMismatchError,
)
from mitfas.mi_core import (
    JointHistogram,
    ReferenceMI,
    as_patch,
    bin_values,
    build_joint_histogram,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    joint_entropy,
    joint_mi_approx,
    joint_mi_exact,
    mutual_information,
    patch_entropy,
    pmfs_from_histogram,
)

HALVES = np.array([[0, 0], [255, 255]], dtype=np.uint8)
STRIPES = np.array([[0, 255], [0, 255]], dtype=np.uint8)


class TestBinning:
    def test_bin_edges(self):
        values = np.array([[0, 1, 127, 128, 255]], dtype=np.uint8)
        assert bin_values(values, 2).tolist() == [0, 0, 0, 1, 1]
        assert bin_values(values, 256).tolist() == [0, 1, 127, 128, 255]

    @pytest.mark.parametrize("bins", [1, 257, 0])
    def test_bins_out_of_range(self, bins):
        with pytest.raises(ConfigurationError):
            mutual_information(HALVES, HALVES, bins)

    def test_flat_values_need_dimensions(self):
        patch = as_patch([1, 2, 3, 4, 5, 6], width=3, height=2)
        assert patch.shape == (2, 3)
        with pytest.raises(InputError):
            as_patch([1, 2, 3], width=2, height=2)

    def test_rejects_out_of_range_intensity(self):
        with pytest.raises(InputError):
            as_patch(np.array([[0, 300]]))


class TestHistogram:
    def test_counts_sum_to_pixels(self, textured_frame):
        h = build_joint_histogram(textured_frame, textured_frame[::-1], 16)
        assert h.counts.shape == (16, 16)
        assert int(h.counts.sum()) == h.total == textured_frame.size

    def test_pmfs_normalized(self, textured_frame):
        pmfs = pmfs_from_histogram(build_joint_histogram(textured_frame, textured_frame[::-1], 32))
        assert pmfs.joint.sum() == pytest.approx(1.0, abs=1e-12)
        assert pmfs.marginal_v.sum() == pytest.approx(1.0, abs=1e-12)

    def test_empty_histogram(self):
        empty = JointHistogram(bins=2, counts=np.zeros((2, 2), dtype=np.int64), total=0)
        with pytest.raises(EmptyHistogramError):
            pmfs_from_histogram(empty)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            build_joint_histogram(np.zeros((2, 2), np.uint8), np.zeros((2, 3), np.uint8), 8)


class TestEntropy:
    def test_uniform_two_outcomes(self):
        assert entropy([0.5, 0.5]) == pytest.approx(1.0)

    def test_point_mass(self):
        assert entropy([1.0, 0.0, 0.0]) == 0.0

    def test_unnormalized_rejected(self):
        with pytest.raises(InvalidDistributionError):
            entropy([0.5, 0.6])

    def test_negative_rejected(self):
        with pytest.raises(InvalidDistributionError):
            entropy([1.5, -0.5])

    def test_joint_entropy_uniform_table(self):
        assert joint_entropy(np.full((2, 2), 0.25)) == pytest.approx(2.0)

    def test_conditional_entropy_of_copy_is_zero(self):
        assert conditional_entropy(np.array([[0.5, 0.0], [0.0, 0.5]])) == pytest.approx(0.0, abs=1e-12)

    def test_conditional_entropy_of_independent(self):
        assert conditional_entropy(np.full((2, 2), 0.25)) == pytest.approx(1.0)

    def test_patch_entropy(self):
        assert patch_entropy(HALVES, 2) == pytest.approx(1.0)
        assert patch_entropy(np.full((4, 4), 7, np.uint8), 128) == 0.0


class TestMutualInformation:
    def test_self_information_is_entropy(self, textured_frame):
        mi = mutual_information(textured_frame, textured_frame, 32)
        assert mi == pytest.approx(patch_entropy(textured_frame, 32), abs=1e-9)

    def test_one_bit(self):
        assert mutual_information(HALVES, HALVES, 2) == pytest.approx(1.0)

    def test_independent_halves(self):
        assert mutual_information(HALVES, STRIPES, 2) == pytest.approx(0.0, abs=1e-12)

    def test_constant_patch_carries_nothing(self, textured_frame):
        flat = np.full_like(textured_frame, 90)
        assert mutual_information(flat, textured_frame) == 0.0

    def test_exactly_symmetric(self, rng):
        for _ in range(10):
            a = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
            b = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
            assert mutual_information(a, b) == mutual_information(b, a)

    def test_nonnegative_and_bounded(self, rng):
        a = rng.integers(0, 256, size=(20, 20), dtype=np.uint8)
        b = rng.integers(0, 256, size=(20, 20), dtype=np.uint8)
        mi = mutual_information(a, b, 64)
        assert 0.0 <= mi <= min(patch_entropy(a, 64), patch_entropy(b, 64)) + 1e-9

    def test_invariant_to_bijective_relabel(self, textured_frame):
        inverted = (255 - textured_frame).astype(np.uint8)
        assert mutual_information(textured_frame, inverted, 256) == pytest.approx(
            mutual_information(textured_frame, textured_frame, 256), abs=1e-9)


class TestJointMI:
    def test_approx_single_member_is_pairwise(self, noise_patches):
        a, c = noise_patches[0], noise_patches[1]
        assert joint_mi_approx([a], c, 16) == pytest.approx(mutual_information(a, c, 16))

    def test_approx_is_mean(self, noise_patches):
        s, c = noise_patches[:3], noise_patches[3]
        expected = sum(mutual_information(p, c, 16) for p in s) / 3
        assert joint_mi_approx(s, c, 16) == pytest.approx(expected)

    def test_empty_set(self, noise_patches):
        with pytest.raises(PreconditionError):
            joint_mi_approx([], noise_patches[0])
        with pytest.raises(PreconditionError):
            joint_mi_exact([], noise_patches[0])

    def test_exact_single_member_matches_pairwise(self, noise_patches):
        a, c = noise_patches[0], noise_patches[1]
        assert joint_mi_exact([a], c, 16) == pytest.approx(mutual_information(a, c, 16), abs=1e-9)

    def test_exact_capacity_guard(self, noise_patches):
        with pytest.raises(CapacityError) as err:
            joint_mi_exact(noise_patches[:3], noise_patches[3], 128)
        assert err.value.limit == 1 << 20

    def test_exact_at_capacity_limit(self, noise_patches):
        # 16^5 cells is exactly 2^20
        assert joint_mi_exact(noise_patches[:4], noise_patches[4], 16) >= 0.0

    def test_chain_rule(self, noise_patches):
        a, b, c = noise_patches[:3]
        lhs = joint_mi_exact([a, b], c, 8)
        rhs = mutual_information(a, c, 8) + conditional_mutual_information(b, c, a, 8)
        assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_conditioning_on_a_copy_removes_information(self, noise_patches):
        a, c = noise_patches[:2]
        assert conditional_mutual_information(a, c, a, 8) == pytest.approx(0.0, abs=1e-9)

    def test_conditioning_on_nothing(self, noise_patches):
        a, c = noise_patches[:2]
        assert conditional_mutual_information(a, c, [], 16) == mutual_information(a, c, 16)

    def test_duplicated_member_adds_nothing(self, noise_patches):
        p, q = noise_patches[:2]
        assert joint_mi_exact([p, p], q, 16) == pytest.approx(mutual_information(p, q, 16), abs=1e-9)

    def test_xor_is_invisible_pairwise(self, rng):
        v = 255 * rng.integers(0, 2, size=(64, 64)).astype(np.uint8)
        z = 255 * rng.integers(0, 2, size=(64, 64)).astype(np.uint8)
        c = np.where((v > 0) ^ (z > 0), 255, 0).astype(np.uint8)
        assert joint_mi_exact([v, z], c, 2) >= 0.95
        assert mutual_information(v, c, 2) <= 0.05
        assert mutual_information(z, c, 2) <= 0.05
        assert joint_mi_approx([v, z], c, 2) <= 0.05


class TestDecomposition:
    def test_mi_is_entropy_sum_minus_joint(self, textured_frame):
        other = np.roll(textured_frame, 1, axis=1) // 2 + textured_frame // 2
        pmfs = pmfs_from_histogram(build_joint_histogram(textured_frame, other, 32))
        expected = entropy(pmfs.marginal_v) + entropy(pmfs.marginal_z) - joint_entropy(pmfs.joint)
        assert mutual_information(textured_frame, other, 32) == pytest.approx(expected, abs=1e-9)

    def test_joint_entropy_bounds(self, noise_patches):
        pmfs = pmfs_from_histogram(build_joint_histogram(noise_patches[0], noise_patches[1], 8))
        hv, hz, hvz = entropy(pmfs.marginal_v), entropy(pmfs.marginal_z), joint_entropy(pmfs.joint)
        assert max(hv, hz) <= hvz + 1e-12
        assert hvz <= hv + hz + 1e-12

    def test_marginals_sum_the_joint(self, textured_frame):
        pmfs = pmfs_from_histogram(build_joint_histogram(textured_frame, np.flipud(textured_frame), 16))
        np.testing.assert_allclose(pmfs.joint.sum(axis=1), pmfs.marginal_v, atol=1e-12)
        np.testing.assert_allclose(pmfs.joint.sum(axis=0), pmfs.marginal_z, atol=1e-12)

    @pytest.mark.parametrize("seed", range(25))
    def test_random_pairs(self, seed):
        rng = np.random.default_rng(seed)
        h, w = (int(v) for v in rng.integers(4, 40, size=2))
        bins = int(rng.choice([2, 8, 32, 128, 256]))
        a = rng.integers(0, 256, size=(h, w), dtype=np.uint8)
        # partially dependent second patch
        b = np.where(rng.random((h, w)) < 0.5, a, rng.integers(0, 256, size=(h, w))).astype(np.uint8)
        mi = mutual_information(a, b, bins)
        assert mi == mutual_information(b, a, bins)
        assert 0.0 <= mi <= min(patch_entropy(a, bins), patch_entropy(b, bins)) + 1e-9


class TestReferenceMI:
    @pytest.mark.parametrize("bins", [2, 32, 128])
    def test_agrees_with_mutual_information(self, noise_patches, bins):
        scorer = ReferenceMI(noise_patches[0], bins)
        for candidate in noise_patches[1:6] + [noise_patches[0]]:
            assert scorer(candidate) == pytest.approx(mutual_information(candidate, noise_patches[0], bins), abs=1e-9)

    def test_scores_precomputed_codes(self, textured_frame):
        ref = textured_frame[10:30, 5:25]
        scorer = ReferenceMI(ref, 64)
        window = textured_frame[12:32, 6:26]
        codes = bin_values(textured_frame, 64).reshape(textured_frame.shape)[12:32, 6:26].ravel()
        assert scorer.from_codes(codes) == scorer(window)

    def test_shape_mismatch(self, noise_patches):
        with pytest.raises(ShapeMismatchError):
            ReferenceMI(noise_patches[0], 16)(np.zeros((3, 3), np.uint8))
