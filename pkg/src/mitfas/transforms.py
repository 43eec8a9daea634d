# src/mitfas/transforms.py
"""
Window extraction (rotation, translation, scaling) and reference construction.

Coordinates: origin at the top-left pixel, x horizontal (column), y vertical (row).
A TransformParams places the output pixel (u, v) at source position
R(theta) . (scale*u, scale*v) + displacement, sampled bilinearly with clamp-to-edge.
"""
import math
from typing import Tuple

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import ndimage as ndi

from mitfas.errors import ConfigurationError, FrameFormatError, InputError, OutOfRangeError
from mitfas.mi_core import PixelPatch

Frame = npt.NDArray[np.uint8]

DEFAULT_WIDTH_RATIO = 1.10
DEFAULT_HEIGHT_RATIO = 1.25
DEFAULT_TOP_MARGIN = 0.15

# BT.601 luma weights
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
_SNAP_EPS = 1e-9


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


class TransformParams(BaseModel):
    """Window placement: rotation, displacement and scale."""
    model_config = ConfigDict(frozen=True)

    theta: float = Field(default=0.0, description="Rotation in radians, in (-pi, pi]")
    displacement: Tuple[float, float] = Field(default=(0.0, 0.0), description="(dx, dy) in raw-frame pixels")
    scale: float = Field(default=1.0, description="Extracted window size / reference size")

    @field_validator("theta")
    @classmethod
    def _theta_range(cls, v: float) -> float:
        if not (-math.pi < v <= math.pi):
            raise ValueError(f"theta must be in (-pi, pi], got {v}")
        return v

    @field_validator("scale")
    @classmethod
    def _scale_positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError(f"scale must be > 0, got {v}")
        return v

    @property
    def dx(self) -> float:
        return self.displacement[0]

    @property
    def dy(self) -> float:
        return self.displacement[1]


class BBox(BaseModel):
    """Axis-aligned box (top-left corner, size) in pixels. Also used for search areas."""
    model_config = ConfigDict(frozen=True)

    x: int
    y: int
    w: int
    h: int

    @field_validator("w", "h")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError(f"box width and height must be > 0, got {v}")
        return v

    def intersects(self, width: int, height: int) -> bool:
        return self.x < width and self.y < height and self.x + self.w > 0 and self.y + self.h > 0

    def clamp(self, width: int, height: int) -> "BBox":
        x0, y0 = max(0, self.x), max(0, self.y)
        x1, y1 = min(width, self.x + self.w), min(height, self.y + self.h)
        if x1 <= x0 or y1 <= y0:
            raise OutOfRangeError(f"Box {self.as_tuple()} does not intersect a {width}x{height} frame")
        return BBox(x=x0, y=y0, w=x1 - x0, h=y1 - y0)

    @property
    def center(self) -> Tuple[float, float]:
        return self.x + self.w / 2.0, self.y + self.h / 2.0

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return self.x, self.y, self.w, self.h


class ReferenceSpec(BaseModel):
    """Actor-centred reference patch and where it came from."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    patch: np.ndarray
    origin_params: TransformParams
    source_frame_index: int = 0
    box: BBox = Field(..., description="Enlarged and clamped box the patch was cut from")

    @property
    def size(self) -> Tuple[int, int]:
        """(width, height) of the reference patch."""
        return int(self.patch.shape[1]), int(self.patch.shape[0])


def to_grayscale(frame: np.ndarray) -> Frame:
    frame = np.asarray(frame)
    if frame.ndim == 2:
        return frame if frame.dtype == np.uint8 else np.clip(frame, 0, 255).astype(np.uint8)
    if frame.ndim == 3 and frame.shape[2] == 1:
        return frame[:, :, 0].astype(np.uint8, copy=False)
    if frame.ndim != 3 or frame.shape[2] != 3:
        raise FrameFormatError(f"Unsupported frame layout {frame.shape}; expected 1 or 3 channels")
    rgb = frame.astype(np.float64)
    luma = LUMA_WEIGHTS[0] * rgb[:, :, 0] + LUMA_WEIGHTS[1] * rgb[:, :, 1] + LUMA_WEIGHTS[2] * rgb[:, :, 2]
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def window_size(ref_w: int, ref_h: int, scale: float) -> Tuple[int, int]:
    """Source-frame footprint of a window extracted at `scale`."""
    return max(1, round_half_up(scale * ref_w)), max(1, round_half_up(scale * ref_h))


def window_center(params: TransformParams, ref_w: int, ref_h: int) -> Tuple[float, float]:
    """Center of the window placed by `params` for a reference of size ref_w x ref_h."""
    c, s = math.cos(params.theta), math.sin(params.theta)
    hx, hy = params.scale * ref_w / 2.0, params.scale * ref_h / 2.0
    return params.dx + c * hx - s * hy, params.dy + s * hx + c * hy


def params_for_center(center: Tuple[float, float], ref_w: int, ref_h: int, scale: float, theta: float) -> TransformParams:
    """Inverse of window_center: displacement that puts the window center at `center`."""
    c, s = math.cos(theta), math.sin(theta)
    hx, hy = scale * ref_w / 2.0, scale * ref_h / 2.0
    dx = center[0] - (c * hx - s * hy)
    dy = center[1] - (s * hx + c * hy)
    return TransformParams(theta=theta, displacement=(dx, dy), scale=scale)


def _snap(coords: np.ndarray) -> np.ndarray:
    rounded = np.rint(coords)
    return np.where(np.abs(coords - rounded) < _SNAP_EPS, rounded, coords)


def extract_patch(frame: Frame, params: TransformParams, out_w: int, out_h: int) -> PixelPatch:
    frame = np.asarray(frame)
    if frame.ndim != 2 or frame.dtype != np.uint8:
        raise FrameFormatError(f"extract_patch needs an 8-bit grayscale frame, got shape {frame.shape} dtype {frame.dtype}")
    if out_w < 1 or out_h < 1:
        raise InputError(f"Output size must be at least 1x1, got {out_w}x{out_h}")
    height, width = frame.shape
    c, s = math.cos(params.theta), math.sin(params.theta)
    hu, hv = params.scale * (out_w - 1) / 2.0, params.scale * (out_h - 1) / 2.0
    cx = params.dx + c * hu - s * hv
    cy = params.dy + s * hu + c * hv
    if not (-_SNAP_EPS <= cx <= width - 1 + _SNAP_EPS and -_SNAP_EPS <= cy <= height - 1 + _SNAP_EPS):
        raise OutOfRangeError(f"Window center ({cx:.2f}, {cy:.2f}) lies outside the {width}x{height} frame")

    dx, dy = params.dx, params.dy
    if (params.theta == 0.0 and params.scale == 1.0 and float(dx).is_integer() and float(dy).is_integer()
            and dx >= 0 and dy >= 0 and dx + out_w <= width and dy + out_h <= height):
        x0, y0 = int(dx), int(dy)
        return frame[y0:y0 + out_h, x0:x0 + out_w].copy()

    u, v = np.meshgrid(np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64))
    xs = _snap(c * params.scale * u - s * params.scale * v + dx)
    ys = _snap(s * params.scale * u + c * params.scale * v + dy)
    sampled = ndi.map_coordinates(frame.astype(np.float64), [ys, xs], order=1, mode="nearest")
    return np.clip(np.floor(sampled + 0.5), 0, 255).astype(np.uint8)


def enlarge_box(bbox: BBox,
                width_ratio: float = DEFAULT_WIDTH_RATIO,
                height_ratio: float = DEFAULT_HEIGHT_RATIO,
                top_margin: float = DEFAULT_TOP_MARGIN) -> BBox:
    """Enlarged box before clamping: width centered, extra top margin plus symmetric vertical growth."""
    if width_ratio < 1 or height_ratio < 1:
        raise ConfigurationError("Reference enlargement ratios must be >= 1")
    if not 0 <= top_margin <= height_ratio - 1 + _SNAP_EPS:
        raise ConfigurationError(f"Top margin {top_margin} must lie in [0, height_ratio - 1]")
    symmetric = max(0.0, height_ratio - 1.0 - top_margin)
    new_w = max(1, round_half_up(width_ratio * bbox.w))
    new_h = max(1, round_half_up(height_ratio * bbox.h))
    new_x = round_half_up(bbox.x - (new_w - bbox.w) / 2.0)
    new_y = bbox.y - round_half_up((top_margin + symmetric / 2.0) * bbox.h)
    return BBox(x=new_x, y=new_y, w=new_w, h=new_h)


def make_reference(frame: Frame, bbox: BBox, frame_index: int = 0,
                   width_ratio: float = DEFAULT_WIDTH_RATIO,
                   height_ratio: float = DEFAULT_HEIGHT_RATIO,
                   top_margin: float = DEFAULT_TOP_MARGIN) -> ReferenceSpec:
    gray = to_grayscale(frame)
    height, width = gray.shape
    box = enlarge_box(bbox, width_ratio, height_ratio, top_margin).clamp(width, height)
    params = TransformParams(theta=0.0, displacement=(float(box.x), float(box.y)), scale=1.0)
    patch = extract_patch(gray, params, box.w, box.h)
    return ReferenceSpec(patch=patch, origin_params=params, source_frame_index=frame_index, box=box)
