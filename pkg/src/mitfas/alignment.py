# src/mitfas/alignment.py
"""
Temporal feature alignment: per-frame argmax of a patch measure (mutual information by
default) over a discrete grid of displacements x scales x rotations, with the search area
propagated from the previous optimum and periodic or score-triggered re-localization.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from mitfas.errors import (
    DetectorError,
    FrameFormatError,
    InputError,
    OutOfRangeError,
    PreconditionError,
    SearchFailureError,
)
from mitfas.mi_core import DEFAULT_BINS, MAX_BINS, MIN_BINS, PixelPatch, ReferenceMI, bin_values
from mitfas.tools.measure_tool import Measure, MeasureTool, get_measure
from mitfas.transforms import (
    DEFAULT_HEIGHT_RATIO,
    DEFAULT_TOP_MARGIN,
    DEFAULT_WIDTH_RATIO,
    BBox,
    Frame,
    ReferenceSpec,
    TransformParams,
    enlarge_box,
    extract_patch,
    make_reference,
    params_for_center,
    round_half_up,
    to_grayscale,
    window_center,
    window_size,
)
from mitfas.utils.logger import get_logger

logger = get_logger("alignment")

# (Frame, frame index) -> optional BBox
Detector = Callable[[Frame, int], Optional[BBox]]

# fast MI scores within this of the best are rescored exactly before the tie-break
_RESCORE_TOLERANCE = 1e-9


class SearchConfig(BaseModel):
    """Window search grid (stride, scales, rotations) and the tracking policy."""
    model_config = ConfigDict(frozen=True)

    stride: int = Field(default=10, description="Sliding-window stride in pixels")
    scale_set: List[float] = Field(default_factory=lambda: [0.9, 1.0, 1.1])
    theta_set: List[float] = Field(default_factory=lambda: [0.0])
    search_expansion: float = Field(default=1.25, description="Search area / previous window size")
    bins: int = Field(default=DEFAULT_BINS)
    relocalize_every: int = Field(default=16, description="Re-localization cadence in frames; 0 disables it")
    relocalize_mi_floor: float = Field(default=0.5, description="Re-localize when score < floor * running mean")
    measure: str = Field(default="mi", description="Name of the measure in MeasureTool")
    refine: bool = Field(default=True, description="Stride-1 pass within +-stride//2 of the best grid window")
    workers: int = Field(default=1, description="Threads used to score grid points")
    reference_width_ratio: float = DEFAULT_WIDTH_RATIO
    reference_height_ratio: float = DEFAULT_HEIGHT_RATIO
    reference_top_margin: float = DEFAULT_TOP_MARGIN

    @field_validator("stride")
    @classmethod
    def _stride(cls, v: int) -> int:
        if v < 1:
            raise ValueError("stride must be >= 1")
        return v

    @field_validator("scale_set")
    @classmethod
    def _scales(cls, v: List[float]) -> List[float]:
        if not v or any(s <= 0 for s in v):
            raise ValueError("scale_set must be nonempty with all scales > 0")
        return v

    @field_validator("theta_set")
    @classmethod
    def _thetas(cls, v: List[float]) -> List[float]:
        if not v or any(not (-math.pi < t <= math.pi) for t in v):
            raise ValueError("theta_set must be nonempty with angles in (-pi, pi]")
        return v

    @field_validator("search_expansion")
    @classmethod
    def _expansion(cls, v: float) -> float:
        if v < 1:
            raise ValueError("search_expansion must be >= 1")
        return v

    @field_validator("bins")
    @classmethod
    def _bins(cls, v: int) -> int:
        if not MIN_BINS <= v <= MAX_BINS:
            raise ValueError(f"bins must be in [{MIN_BINS}, {MAX_BINS}]")
        return v

    @field_validator("relocalize_every", "workers")
    @classmethod
    def _nonnegative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("must be >= 0")
        return v

    @field_validator("relocalize_mi_floor")
    @classmethod
    def _floor(cls, v: float) -> float:
        if v < 0:
            raise ValueError("relocalize_mi_floor must be >= 0")
        return v

    @field_validator("measure")
    @classmethod
    def _measure(cls, v: str) -> str:
        if v not in MeasureTool.names():
            raise ValueError(f"unknown measure '{v}'")
        return v


class AlignmentRecord(BaseModel):
    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    frame_index: int
    params: TransformParams
    score: float
    search_area: BBox
    relocalized: bool = False
    reference: Literal["seed", "chained"] = "chained"


class AlignmentTrace(BaseModel):
    """One record per input frame, in index order."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    records: List[AlignmentRecord] = Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def scores(self) -> List[float]:
        return [r.score for r in self.records]

    @property
    def relocalized_frames(self) -> List[int]:
        return [r.frame_index for r in self.records if r.relocalized]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for r in self.records:
            rows.append({
                "frame_index": r.frame_index,
                "theta": r.params.theta,
                "dx": r.params.dx,
                "dy": r.params.dy,
                "scale": r.params.scale,
                "score": r.score,
                "area_x": r.search_area.x,
                "area_y": r.search_area.y,
                "area_w": r.search_area.w,
                "area_h": r.search_area.h,
                "relocalized": r.relocalized,
                "reference": r.reference,
            })
        return pd.DataFrame(rows)


class _Candidate(BaseModel):
    model_config = ConfigDict(frozen=True)

    params: TransformParams
    center_dist2: float


def _axis_positions(lo: int, length: int, win: int, anchor: float, stride: int) -> List[int]:
    """
    Window start positions along one axis: anchor +- k*stride plus both extremes of the area,
    window inside [lo, lo+length). The extremes keep the window movable when the slack is
    smaller than the stride.
    """
    hi = lo + length - win
    if hi < lo:
        return [round_half_up(lo + (length - win) / 2.0)]
    a = min(max(round_half_up(anchor), lo), hi)
    first = a - ((a - lo) // stride) * stride
    return sorted(set(range(first, hi + 1, stride)) | {lo, hi})


def _tie_break_key(score: float, cand: _Candidate, maximize: bool):
    p = cand.params
    primary = -score if maximize else score
    return (primary, cand.center_dist2, abs(p.scale - 1.0), abs(p.theta), p.dx, p.dy)


def _candidate(x: int, y: int, win_w: int, win_h: int, ref_size: Tuple[int, int], scale: float, theta: float,
               area_center: Tuple[float, float]) -> _Candidate:
    cx, cy = x + win_w / 2.0, y + win_h / 2.0
    if theta == 0.0:
        params = TransformParams(theta=0.0, displacement=(float(x), float(y)), scale=scale)
    else:
        params = params_for_center((cx, cy), ref_size[0], ref_size[1], scale, theta)
    return _Candidate(params=params, center_dist2=(cx - area_center[0]) ** 2 + (cy - area_center[1]) ** 2)


def build_search_grid(area: BBox, ref_size: Tuple[int, int], config: SearchConfig,
                      anchor: Optional[TransformParams] = None) -> List[_Candidate]:
    ref_w, ref_h = ref_size
    grid: List[_Candidate] = []
    for scale in config.scale_set:
        win_w, win_h = window_size(ref_w, ref_h, scale)
        acx, acy = window_center(anchor, ref_w, ref_h) if anchor is not None else area.center
        xs = _axis_positions(area.x, area.w, win_w, acx - win_w / 2.0, config.stride)
        ys = _axis_positions(area.y, area.h, win_h, acy - win_h / 2.0, config.stride)
        for theta in config.theta_set:
            for y in ys:
                for x in xs:
                    grid.append(_candidate(x, y, win_w, win_h, ref_size, scale, theta, area.center))
    return grid


def _refine_axis(start: int, lo: int, length: int, win: int, radius: int) -> List[int]:
    hi = lo + length - win
    if hi < lo:
        return [start]
    return list(range(max(lo, start - radius), min(hi, start + radius) + 1))


def build_refine_grid(best: TransformParams, area: BBox, ref_size: Tuple[int, int], radius: int) -> List[_Candidate]:
    """Every integer placement within `radius` px of `best` at its scale and rotation, window inside the area."""
    ref_w, ref_h = ref_size
    win_w, win_h = window_size(ref_w, ref_h, best.scale)
    cx, cy = window_center(best, ref_w, ref_h)
    x0, y0 = round_half_up(cx - win_w / 2.0), round_half_up(cy - win_h / 2.0)
    return [_candidate(x, y, win_w, win_h, ref_size, best.scale, best.theta, area.center)
            for y in _refine_axis(y0, area.y, area.h, win_h, radius)
            for x in _refine_axis(x0, area.x, area.w, win_w, radius)]


def search_best_window(frame: Frame, reference: ReferenceSpec, search_area: BBox, config: SearchConfig,
                       anchor: Optional[TransformParams] = None,
                       measure: Optional[Measure] = None,
                       executor: Optional[ThreadPoolExecutor] = None) -> Tuple[TransformParams, float]:
    """
    Evaluate the whole grid and return the best (params, score) under the deterministic tie-break.

    With `config.refine` and stride > 1 the winner is re-searched at stride 1 within stride//2
    pixels, at its own scale and rotation and inside the search area.
    """
    gray = to_grayscale(frame)
    height, width = gray.shape
    if reference.patch.size == 0:
        raise PreconditionError("Reference patch is empty")
    measure = measure or get_measure(config.measure)
    try:
        area = search_area.clamp(width, height)
    except OutOfRangeError as e:
        raise SearchFailureError(search_area, reason=str(e)) from e

    ref_w, ref_h = reference.size

    def exact(cand: _Candidate) -> Optional[float]:
        try:
            patch = extract_patch(gray, cand.params, ref_w, ref_h)
        except OutOfRangeError:
            return None
        return measure(patch, reference.patch, config.bins)

    evaluate = exact
    if measure.name == "mi":
        evaluate = _fast_mi_evaluator(gray, reference, config.bins)

    def pick(candidates: List[_Candidate]) -> Optional[Tuple[_Candidate, float]]:
        if executor is not None:
            scores = list(executor.map(evaluate, candidates))
        else:
            scores = [evaluate(c) for c in candidates]
        valid = [(c, s) for c, s in zip(candidates, scores) if s is not None and not math.isnan(s)]
        if not valid:
            return None
        if evaluate is not exact:
            # fast scores agree with the exact ones to rounding; rescore the near-best exactly
            top = max(s for _, s in valid)
            valid = [(c, exact(c)) for c, s in valid if s >= top - _RESCORE_TOLERANCE]
        return min(valid, key=lambda cs: _tie_break_key(cs[1], cs[0], measure.maximize))

    grid = build_search_grid(area, (ref_w, ref_h), config, anchor)
    best = pick(grid)
    if best is None:
        raise SearchFailureError(search_area)
    searched = len(grid)
    if config.refine and config.stride > 1:
        local = build_refine_grid(best[0].params, area, (ref_w, ref_h), config.stride // 2)
        best = pick(local) or best
        searched += len(local)
    logger.debug(f"Searched {searched} grid points in area {area.as_tuple()}; best score {best[1]:.4f}")
    return best[0].params, best[1]


def _fast_mi_evaluator(gray: Frame, reference: ReferenceSpec, bins: int) -> Callable[[_Candidate], Optional[float]]:
    """Candidate scorer that bins the frame once; integer unscaled unrotated windows are sliced from it."""
    ref_w, ref_h = reference.size
    height, width = gray.shape
    scorer = ReferenceMI(reference.patch, bins)
    frame_codes = bin_values(gray, bins).reshape(gray.shape)

    def evaluate(cand: _Candidate) -> Optional[float]:
        p = cand.params
        x, y = p.dx, p.dy
        if (p.theta == 0.0 and p.scale == 1.0 and float(x).is_integer() and float(y).is_integer()
                and x >= 0 and y >= 0 and x + ref_w <= width and y + ref_h <= height):
            x0, y0 = int(x), int(y)
            return scorer.from_codes(frame_codes[y0:y0 + ref_h, x0:x0 + ref_w].ravel())
        try:
            patch = extract_patch(gray, p, ref_w, ref_h)
        except OutOfRangeError:
            return None
        return scorer.from_codes(bin_values(patch, bins))

    return evaluate


def propagate_search_area(prev: TransformParams, ref_size: Tuple[int, int], expansion: float,
                          frame_size: Tuple[int, int]) -> BBox:
    """Previous window expanded by `expansion` about its center, clamped to the frame (width, height)."""
    if expansion < 1:
        raise ValueError("expansion must be >= 1")
    ref_w, ref_h = ref_size
    width, height = frame_size
    cx, cy = window_center(prev, ref_w, ref_h)
    area_w = max(1, round_half_up(expansion * prev.scale * ref_w))
    area_h = max(1, round_half_up(expansion * prev.scale * ref_h))
    box = BBox(x=round_half_up(cx - area_w / 2.0), y=round_half_up(cy - area_h / 2.0), w=area_w, h=area_h)
    try:
        return box.clamp(width, height)
    except OutOfRangeError:
        return BBox(x=0, y=0, w=width, h=height)


def _below_floor(score: float, segment: Sequence[float], measure: Measure, floor: float) -> bool:
    # exact matches under psnr score inf; they carry no level for the running mean
    finite = [s for s in segment if math.isfinite(s)]
    if not finite or floor <= 0 or not math.isfinite(score):
        return False
    mean = sum(finite) / len(finite)
    if measure.maximize:
        return score < floor * mean
    return score > mean / floor


def _homogeneous_gray(frames: Sequence[Frame]) -> List[Frame]:
    if not frames:
        raise InputError("align_sequence needs at least one frame")
    grays = [to_grayscale(f) for f in frames]
    shape = grays[0].shape
    for i, g in enumerate(grays):
        if g.shape != shape:
            raise FrameFormatError(f"Frame {i} has size {g.shape[1]}x{g.shape[0]}, expected {shape[1]}x{shape[0]}")
    return grays


def align_sequence(frames: Sequence[Frame], seed_bbox: BBox, config: Optional[SearchConfig] = None,
                   detector: Optional[Detector] = None) -> Tuple[AlignmentTrace, List[PixelPatch]]:
    config = config or SearchConfig()
    grays = _homogeneous_gray(frames)
    height, width = grays[0].shape
    measure = get_measure(config.measure)

    seed_ref = make_reference(grays[0], seed_bbox, 0, config.reference_width_ratio,
                              config.reference_height_ratio, config.reference_top_margin)
    ref_w, ref_h = seed_ref.size
    logger.info(f"Reference {ref_w}x{ref_h} from seed box {seed_bbox.as_tuple()}; aligning {len(grays)} frames")

    records = [AlignmentRecord(frame_index=0, params=seed_ref.origin_params,
                               score=measure(seed_ref.patch, seed_ref.patch, config.bins),
                               search_area=seed_ref.box, relocalized=False, reference="seed")]
    patches: List[PixelPatch] = [seed_ref.patch.copy()]
    chained = seed_ref
    prev = seed_ref.origin_params
    segment: List[float] = []

    executor = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
    try:
        def search(t: int, reference: ReferenceSpec, area: BBox, anchor: Optional[TransformParams]):
            try:
                return search_best_window(grays[t], reference, area, config, anchor=anchor,
                                          measure=measure, executor=executor)
            except SearchFailureError as e:
                raise SearchFailureError(e.search_area, frame_index=t) from e

        def relocalize(t: int) -> Tuple[TransformParams, float, BBox]:
            box = None
            if detector is not None:
                try:
                    box = detector(frames[t], t)
                except Exception as e:
                    raise DetectorError(t, str(e)) from e
            if box is not None:
                # detector output wins: search around its enlarged box
                enlarged = enlarge_box(box, config.reference_width_ratio,
                                       config.reference_height_ratio, config.reference_top_margin)
                anchor = TransformParams(theta=0.0, displacement=(float(enlarged.x), float(enlarged.y)), scale=1.0)
                area = propagate_search_area(anchor, (ref_w, ref_h), config.search_expansion, (width, height))
            else:
                anchor = prev
                area = BBox(x=0, y=0, w=width, h=height)
            params, score = search(t, seed_ref, area, anchor)
            return params, score, area

        for t in range(1, len(grays)):
            cadence = config.relocalize_every > 0 and t % config.relocalize_every == 0
            if cadence:
                params, score, area = relocalize(t)
                relocalized = True
            else:
                area = propagate_search_area(prev, (ref_w, ref_h), config.search_expansion, (width, height))
                params, score = search(t, chained, area, prev)
                relocalized = False
                if _below_floor(score, segment, measure, config.relocalize_mi_floor):
                    logger.warning(f"Frame {t}: score {score:.4f} fell below the floor; re-localizing")
                    params, score, area = relocalize(t)
                    relocalized = True

            if relocalized:
                segment = [score]
            else:
                segment.append(score)

            patch = extract_patch(grays[t], params, ref_w, ref_h)
            records.append(AlignmentRecord(frame_index=t, params=params, score=score, search_area=area,
                                           relocalized=relocalized,
                                           reference="seed" if relocalized else "chained"))
            patches.append(patch)
            chained = ReferenceSpec(patch=patch, origin_params=params, source_frame_index=t,
                                    box=BBox(x=round_half_up(params.dx), y=round_half_up(params.dy), w=ref_w, h=ref_h))
            prev = params
            logger.debug(f"Frame {t}: displacement ({params.dx:.1f}, {params.dy:.1f}) scale {params.scale} "
                         f"score {score:.4f}{' [relocalized]' if relocalized else ''}")
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    trace = AlignmentTrace(records=records)
    logger.info(f"Aligned {len(patches)} frames; re-localized at {trace.relocalized_frames or 'none'}")
    return trace, patches
