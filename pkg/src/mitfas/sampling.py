# src/mitfas/sampling.py
"""
Mutual-information frame sampling.

Starting from a random frame, each next frame is the candidate in a randomly sized pool
after the previous pick that minimizes

    alpha * I(prev; cand) + beta * mean over sampled frames s of I(s; cand)

i.e. the frame least redundant with what has been sampled so far. Random and uniform
samplers are provided as comparison baselines.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mitfas.errors import ConfigurationError, PoolExhaustedError, PreconditionError, ShapeMismatchError
from mitfas.mi_core import DEFAULT_BINS, MAX_BINS, MIN_BINS, PixelPatch, as_patch, mutual_information
from mitfas.utils.logger import get_logger

logger = get_logger("sampling")

SamplerKind = Literal["mis", "random", "uniform"]


class SamplingConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(default=1.0, description="Weight of I(prev; cand)")
    beta: float = Field(default=1.0, description="Weight of the mean MI against all sampled frames")
    n_frames: int = Field(default=16, description="Number of frames to sample")
    bins: int = Field(default=DEFAULT_BINS)
    seed: int = Field(default=0, description="Seed of the 64-bit generator")
    stride_max: Optional[int] = Field(default=None, description="Largest random stride; default 2*floor(T/n)")
    workers: int = Field(default=1, description="Threads used to score a candidate pool")

    @field_validator("alpha", "beta")
    @classmethod
    def _weights(cls, v: float) -> float:
        if v < 0:
            raise ValueError("alpha and beta must be >= 0")
        return v

    @field_validator("n_frames")
    @classmethod
    def _n_frames(cls, v: int) -> int:
        if v < 1:
            raise ValueError("n_frames must be >= 1")
        return v

    @field_validator("bins")
    @classmethod
    def _bins(cls, v: int) -> int:
        if not MIN_BINS <= v <= MAX_BINS:
            raise ValueError(f"bins must be in [{MIN_BINS}, {MAX_BINS}]")
        return v

    @field_validator("seed")
    @classmethod
    def _seed(cls, v: int) -> int:
        if not 0 <= v < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        return v

    @field_validator("stride_max")
    @classmethod
    def _stride_max(cls, v: Optional[int]) -> Optional[int]:
        if v is not None and v < 1:
            raise ValueError("stride_max must be >= 1")
        return v

    @model_validator(mode="after")
    def _not_both_zero(self) -> "SamplingConfig":
        if self.alpha == 0 and self.beta == 0:
            raise ValueError("alpha and beta cannot both be 0")
        return self

    def effective_stride_max(self, total: int) -> int:
        return self.stride_max if self.stride_max is not None else max(1, 2 * (total // self.n_frames))


class SampleResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    indices: List[int]
    scores: List[Optional[float]] = Field(default_factory=list, description="Chosen score per step; None for the start frame")
    pools: List[Tuple[int, int]] = Field(default_factory=list, description="Inclusive candidate-pool bounds per step")
    strides: List[int] = Field(default_factory=list, description="Stride drawn per step; 0 for the start frame")
    seed: int = 0
    method: SamplerKind = "mis"


def candidate_pool(k_prev: int, r: int, total: int) -> range:
    """{k : k_prev < k <= min(k_prev + r, total - 1)}."""
    if r < 1:
        raise ConfigurationError(f"stride must be >= 1, got {r}")
    if k_prev >= total - 1:
        raise PoolExhaustedError(reason=f"no frame after index {k_prev} in a sequence of {total}")
    return range(k_prev + 1, min(k_prev + r, total - 1) + 1)


def _weighted_score(first: float, terms: Sequence[float], alpha: float, beta: float) -> float:
    return alpha * first + (beta / len(terms)) * sum(terms)


def score_candidate(prev: PixelPatch, sampled: Sequence[PixelPatch], candidate: PixelPatch,
                    config: SamplingConfig) -> float:
    """Weighted redundancy of `candidate` with the sampled set; lower is better."""
    if not sampled:
        raise PreconditionError("score_candidate needs at least one sampled patch")
    first = mutual_information(prev, candidate, config.bins)
    terms = [mutual_information(p, candidate, config.bins) for p in sampled]
    return _weighted_score(first, terms, config.alpha, config.beta)


def _check_patches(patches: Sequence[PixelPatch]) -> List[PixelPatch]:
    checked = [as_patch(p) for p in patches]
    for p in checked[1:]:
        if p.shape != checked[0].shape:
            raise ShapeMismatchError(checked[0].shape, p.shape)
    return checked


def sample_sequence(patches: Sequence[PixelPatch], config: Optional[SamplingConfig] = None) -> SampleResult:
    config = config or SamplingConfig()
    total, n = len(patches), config.n_frames
    if total < n:
        raise ConfigurationError(f"Cannot sample {n} frames from a sequence of {total}")
    patches = _check_patches(patches)
    rng = np.random.default_rng(config.seed)
    stride_max = config.effective_stride_max(total)

    k0 = int(rng.integers(0, total - n + 1))
    indices, scores, pools, strides = [k0], [None], [(0, total - n)], [0]
    cache: Dict[Tuple[int, int], float] = {}

    def pair_mi(j: int, k: int) -> float:
        key = (j, k)
        if key not in cache:
            cache[key] = mutual_information(patches[j], patches[k], config.bins)
        return cache[key]

    executor = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        for step in range(1, n):
            r = int(rng.integers(1, stride_max + 1))
            k_prev = indices[-1]
            # leave room for the picks still to come
            try:
                pool = candidate_pool(k_prev, r, total - (n - step) + 1)
            except PoolExhaustedError as e:
                raise PoolExhaustedError(step, indices) from e

            if executor is not None:
                missing = sorted({(j, k) for k in pool for j in indices if (j, k) not in cache})
                for key, value in zip(missing, executor.map(lambda jk: mutual_information(
                        patches[jk[0]], patches[jk[1]], config.bins), missing)):
                    cache[key] = value

            best_k, best_score = None, None
            for k in pool:
                score = _weighted_score(pair_mi(k_prev, k), [pair_mi(j, k) for j in indices],
                                        config.alpha, config.beta)
                if best_score is None or score < best_score:
                    best_k, best_score = k, score
            indices.append(best_k)
            scores.append(best_score)
            pools.append((pool.start, pool.stop - 1))
            strides.append(r)
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    logger.info(f"Sampled {n} of {total} frames: {indices}")
    return SampleResult(indices=indices, scores=scores, pools=pools, strides=strides,
                        seed=config.seed, method="mis")


def verify_picks(patches: Sequence[PixelPatch], result: SampleResult, config: SamplingConfig) -> bool:
    """Re-check post hoc that every pick is the smallest-index argmin over its recorded pool."""
    indices = result.indices
    for i in range(1, len(indices)):
        lo, hi = result.pools[i]
        sampled = [patches[j] for j in indices[:i]]
        scores = [score_candidate(patches[indices[i - 1]], sampled, patches[k], config) for k in range(lo, hi + 1)]
        if lo + int(np.argmin(scores)) != indices[i]:
            return False
    return True


def baseline_sample(kind: SamplerKind, total: int, n_frames: int, seed: int = 0) -> SampleResult:
    """Random or uniform comparison samplers."""
    if n_frames < 1 or total < n_frames:
        raise ConfigurationError(f"Cannot sample {n_frames} frames from a sequence of {total}")
    rng = np.random.default_rng(seed)
    if kind == "random":
        indices = sorted(int(i) for i in rng.choice(total, size=n_frames, replace=False))
    elif kind == "uniform":
        start = int(rng.integers(0, total - n_frames + 1))
        end = int(rng.integers(start + n_frames - 1, total))
        positions = np.linspace(start, end, n_frames)
        indices = [int(np.floor(p + 0.5)) for p in positions]
    else:
        raise ConfigurationError(f"Unknown baseline sampler '{kind}'")
    return SampleResult(indices=indices, scores=[None] * n_frames, pools=[(0, total - 1)] * n_frames,
                        strides=[0] * n_frames, seed=seed, method=kind)


def run_sampler(kind: SamplerKind, patches: Sequence[PixelPatch], config: SamplingConfig) -> SampleResult:
    if kind == "mis":
        return sample_sequence(patches, config)
    return baseline_sample(kind, len(patches), config.n_frames, config.seed)
