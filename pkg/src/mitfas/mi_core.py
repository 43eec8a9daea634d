# src/mitfas/mi_core.py
"""
Histogram-based information measures between 8-bit pixel patches.

All quantities are in bits. Intensities are binned with bin(v) = floor(v * B / 256)
and probabilities are estimated by normalizing joint histograms of co-located pixels.
Every function here is pure, so calls are safe from any number of threads.
"""
import math
from typing import List, Sequence, Union

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from mitfas.errors import (
    CapacityError,
    ConfigurationError,
    EmptyHistogramError,
    InvalidDistributionError,
    PreconditionError,
    ShapeMismatchError,
    InputError,
)

PixelPatch = npt.NDArray[np.uint8]

DEFAULT_BINS = 128
MIN_BINS = 2
MAX_BINS = 256
MAX_TABLE_CELLS = 1 << 20
NORMALIZATION_TOLERANCE = 1e-9


class JointHistogram(BaseModel):
    """B x B co-occurrence counts of binned pixel pairs (rows: first patch, columns: second)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    bins: int = Field(..., description="Number of intensity bins B")
    counts: np.ndarray = Field(..., description="B x B int64 count table")
    total: int = Field(..., description="Number of binned pixel pairs")


class PmfPair(BaseModel):
    """Joint and marginal distributions obtained by normalizing a JointHistogram."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    joint: np.ndarray
    marginal_v: np.ndarray
    marginal_z: np.ndarray


def check_bins(bins: int) -> int:
    if isinstance(bins, bool) or not isinstance(bins, (int, np.integer)):
        raise ConfigurationError(f"bins must be an integer, got {bins!r}")
    if not MIN_BINS <= bins <= MAX_BINS:
        raise ConfigurationError(f"bins must be in [{MIN_BINS}, {MAX_BINS}], got {bins}")
    return int(bins)


def as_patch(values, width: int = None, height: int = None) -> PixelPatch:
    """Coerce `values` to a 2-D uint8 patch. Flat sequences need width and height."""
    if isinstance(values, np.ndarray) and values.dtype == np.uint8 and values.ndim == 2 and width is None:
        if values.size == 0:
            raise InputError("Patch must have at least one pixel")
        return values
    arr = np.asarray(values)
    if width is not None or height is not None:
        if width is None or height is None or width < 1 or height < 1:
            raise InputError(f"Invalid patch dimensions {width}x{height}")
        if arr.size != width * height:
            raise InputError(f"Patch has {arr.size} values, expected {width}*{height}={width * height}")
        arr = arr.reshape(height, width)
    if arr.ndim != 2 or arr.size == 0:
        raise InputError(f"Patch must be a nonempty 2-D grid, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.issubdtype(arr.dtype, np.number) or np.any(arr < 0) or np.any(arr > 255):
            raise InputError("Patch values must be intensities in [0, 255]")
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise InputError("Patch values must be integral intensities")
        arr = arr.astype(np.uint8)
    return arr


def bin_values(patch: PixelPatch, bins: int) -> np.ndarray:
    """Flat int64 bin indices floor(v * bins / 256)."""
    return (patch.astype(np.int64).ravel() * bins) >> 8


def _check_same_shape(a: PixelPatch, b: PixelPatch) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(a.shape, b.shape)


def _joint_counts(a: PixelPatch, b: PixelPatch, bins: int) -> np.ndarray:
    codes = bin_values(a, bins) * bins + bin_values(b, bins)
    return np.bincount(codes, minlength=bins * bins).reshape(bins, bins)


def _entropy_from_counts(counts: np.ndarray) -> float:
    nz = counts[counts > 0].astype(np.float64)
    total = nz.sum()
    if total == 0:
        raise EmptyHistogramError("Cannot estimate entropy from an empty histogram")
    p = nz / total
    h = -math.fsum((p * np.log2(p)).tolist())
    return h if h > 0 else 0.0


def _validate_pmf(pmf: np.ndarray) -> np.ndarray:
    arr = np.asarray(pmf, dtype=np.float64)
    if arr.size == 0 or not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidDistributionError("Distribution entries must be finite and nonnegative")
    if abs(math.fsum(arr.ravel().tolist()) - 1.0) > NORMALIZATION_TOLERANCE:
        raise InvalidDistributionError(f"Distribution sums to {arr.sum():.12f}, expected 1")
    return arr


def _entropy_bits(p: np.ndarray) -> float:
    nz = p[p > 0]
    h = -math.fsum((nz * np.log2(nz)).tolist())
    return h if h > 0 else 0.0


def build_joint_histogram(a, b, bins: int = DEFAULT_BINS) -> JointHistogram:
    bins = check_bins(bins)
    a, b = as_patch(a), as_patch(b)
    _check_same_shape(a, b)
    counts = _joint_counts(a, b, bins)
    return JointHistogram(bins=bins, counts=counts, total=int(a.size))


def pmfs_from_histogram(h: JointHistogram) -> PmfPair:
    if h.total <= 0:
        raise EmptyHistogramError("Joint histogram is empty")
    joint = h.counts / float(h.total)
    # marginals from integer sums keep them exact row/column totals
    marginal_v = h.counts.sum(axis=1) / float(h.total)
    marginal_z = h.counts.sum(axis=0) / float(h.total)
    return PmfPair(joint=joint, marginal_v=marginal_v, marginal_z=marginal_z)


def entropy(pmf) -> float:
    arr = _validate_pmf(pmf)
    if arr.ndim != 1:
        raise InvalidDistributionError(f"entropy expects a 1-D distribution, got shape {arr.shape}")
    return _entropy_bits(arr)


def joint_entropy(joint) -> float:
    arr = _validate_pmf(joint)
    if arr.ndim != 2:
        raise InvalidDistributionError(f"joint_entropy expects a 2-D table, got shape {arr.shape}")
    return _entropy_bits(arr.ravel())


def conditional_entropy(joint) -> float:
    """H(Z|V) for a joint table indexed [v, z]."""
    arr = _validate_pmf(joint)
    if arr.ndim != 2:
        raise InvalidDistributionError(f"conditional_entropy expects a 2-D table, got shape {arr.shape}")
    h = _entropy_bits(arr.ravel()) - _entropy_bits(arr.sum(axis=1))
    return h if h > 0 else 0.0


def patch_entropy(a, bins: int = DEFAULT_BINS) -> float:
    """Entropy of the B-bin intensity marginal of one patch."""
    bins = check_bins(bins)
    a = as_patch(a)
    return _entropy_from_counts(np.bincount(bin_values(a, bins), minlength=bins))


def mutual_information_from_counts(counts: np.ndarray) -> float:
    total = int(counts.sum())
    if total == 0:
        raise EmptyHistogramError("Joint histogram is empty")
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    i, j = np.nonzero(counts)
    c = counts[i, j].astype(np.float64)
    # p(v,z) / (p(v) p(z)) = c * N / (r_v * c_z); the product is commutative so
    # transposed tables give the same multiset of terms and fsum makes the sum order-free
    ratio = (c * total) / (rows[i].astype(np.float64) * cols[j].astype(np.float64))
    terms = (c / total) * np.log2(ratio)
    mi = math.fsum(terms.tolist())
    return mi if mi > 0 else 0.0


def mutual_information(a, b, bins: int = DEFAULT_BINS) -> float:
    bins = check_bins(bins)
    a, b = as_patch(a), as_patch(b)
    _check_same_shape(a, b)
    return mutual_information_from_counts(_joint_counts(a, b, bins))


def _xlog2x_sum(counts: np.ndarray) -> float:
    nz = counts[counts > 0].astype(np.float64)
    return float(np.dot(nz, np.log2(nz)))


class ReferenceMI:
    """
    MI against one fixed reference, for search loops that score many candidates.

    The reference is binned once and its marginal term cached, so each candidate costs two
    bincounts and a vectorized log. I = log2(N) - (S_ref + S_cand - S_joint) / N where
    S(c) = sum c*log2(c) over nonzero counts. Agrees with mutual_information to rounding;
    use mutual_information where exact symmetry matters.
    """

    def __init__(self, reference, bins: int = DEFAULT_BINS):
        self.bins = check_bins(bins)
        reference = as_patch(reference)
        self.shape = reference.shape
        self.total = int(reference.size)
        ref_codes = bin_values(reference, self.bins)
        self._offsets = ref_codes * self.bins
        self._ref_term = _xlog2x_sum(np.bincount(ref_codes, minlength=self.bins))
        self._log_total = math.log2(self.total)

    def from_codes(self, codes: np.ndarray) -> float:
        """Score a candidate given as flat bin indices (see bin_values), same length as the reference."""
        joint = np.bincount(self._offsets + codes, minlength=self.bins * self.bins)
        marginal = np.bincount(codes, minlength=self.bins)
        mi = self._log_total - (self._ref_term + _xlog2x_sum(marginal) - _xlog2x_sum(joint)) / self.total
        return mi if mi > 0 else 0.0

    def __call__(self, patch) -> float:
        patch = as_patch(patch)
        if patch.shape != self.shape:
            raise ShapeMismatchError(patch.shape, self.shape)
        return self.from_codes(bin_values(patch, self.bins))


def _tuple_entropy(patches: Sequence[PixelPatch], bins: int) -> float:
    cells = bins ** len(patches)
    if cells > MAX_TABLE_CELLS:
        raise CapacityError(cells, MAX_TABLE_CELLS)
    codes = np.zeros(patches[0].size, dtype=np.int64)
    for p in patches:
        codes = codes * bins + bin_values(p, bins)
    return _entropy_from_counts(np.bincount(codes))


def _prepare_set(sampled, candidate, bins: int):
    bins = check_bins(bins)
    if not sampled:
        raise PreconditionError("The sampled set must contain at least one patch")
    candidate = as_patch(candidate)
    patches = [as_patch(p) for p in sampled]
    for p in patches:
        _check_same_shape(p, candidate)
    return patches, candidate, bins


def joint_mi_approx(sampled: Sequence, candidate, bins: int = DEFAULT_BINS) -> float:
    """Mean of the pairwise MI between each sampled patch and the candidate."""
    patches, candidate, bins = _prepare_set(sampled, candidate, bins)
    values = [mutual_information(p, candidate, bins) for p in patches]
    return sum(values) / len(values)


def joint_mi_exact(sampled: Sequence, candidate, bins: int = DEFAULT_BINS) -> float:
    """I(F_0, ..., F_i; candidate) from the full tuple histogram. Oracle use only."""
    patches, candidate, bins = _prepare_set(sampled, candidate, bins)
    cells = bins ** (len(patches) + 1)
    if cells > MAX_TABLE_CELLS:
        raise CapacityError(cells, MAX_TABLE_CELLS)
    mi = (_tuple_entropy(patches, bins)
          + _tuple_entropy([candidate], bins)
          - _tuple_entropy(patches + [candidate], bins))
    return mi if mi > 0 else 0.0


def conditional_mutual_information(x, y, given: Union[PixelPatch, Sequence[PixelPatch]], bins: int = DEFAULT_BINS) -> float:
    """I(X;Y|Z) = H(X,Z) + H(Y,Z) - H(X,Y,Z) - H(Z), with Z one patch or a set of patches."""
    bins = check_bins(bins)
    x, y = as_patch(x), as_patch(y)
    _check_same_shape(x, y)
    if isinstance(given, np.ndarray) and given.ndim == 2:
        cond: List[PixelPatch] = [as_patch(given)]
    else:
        cond = [as_patch(g) for g in given]
    if not cond:
        return mutual_information(x, y, bins)
    for g in cond:
        _check_same_shape(g, x)
    cells = bins ** (len(cond) + 2)
    if cells > MAX_TABLE_CELLS:
        raise CapacityError(cells, MAX_TABLE_CELLS)
    cmi = (_tuple_entropy([x] + cond, bins)
           + _tuple_entropy([y] + cond, bins)
           - _tuple_entropy([x, y] + cond, bins)
           - _tuple_entropy(cond, bins))
    return cmi if cmi > 0 else 0.0
