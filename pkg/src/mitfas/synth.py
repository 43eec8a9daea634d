# src/mitfas/synth.py
"""
Deterministic synthetic sequences with ground-truth motion: a textured sprite moving over
a seeded value-noise (or gradient) background, with optional per-frame scale and noise.
"""
import json
import math
import re
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import ndimage as ndi

from mitfas.errors import ConfigurationError, GenerationError
from mitfas.mi_core import PixelPatch, as_patch
from mitfas.tools.frame_io import patch_filename, write_patch
from mitfas.transforms import BBox, Frame, round_half_up
from mitfas.utils.logger import get_logger

logger = get_logger("synth")


class MotionSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: List[Tuple[int, int]] = Field(..., description="Per-frame sprite displacement (dx, dy); entry 0 is usually (0, 0)")
    scale_drift: Optional[List[float]] = Field(default=None, description="Per-frame sprite scale; None means 1.0")
    background: Literal["textured-noise", "gradient"] = "textured-noise"
    noise_sigma: float = Field(default=0.0, description="Std of additive Gaussian noise in intensity units")
    seed: int = 0
    start: Optional[Tuple[int, int]] = Field(default=None, description="Top-left of the sprite at frame 0; default centered")

    @field_validator("noise_sigma")
    @classmethod
    def _sigma(cls, v: float) -> float:
        if v < 0:
            raise ValueError("noise_sigma must be >= 0")
        return v

    @model_validator(mode="after")
    def _lengths(self) -> "MotionSpec":
        if not self.path:
            raise ValueError("path must have one entry per frame")
        if self.scale_drift is not None:
            if len(self.scale_drift) != len(self.path):
                raise ValueError("scale_drift length must equal path length")
            if any(s <= 0 for s in self.scale_drift):
                raise ValueError("scales must be > 0")
        return self

    @property
    def frame_count(self) -> int:
        return len(self.path)


def make_sprite(width: int, height: int, seed: int = 0, block: int = 2) -> PixelPatch:
    """High-contrast random block texture standing in for an actor."""
    rng = np.random.default_rng(seed)
    coarse = rng.integers(0, 256, size=(math.ceil(height / block), math.ceil(width / block)), dtype=np.int64)
    return np.kron(coarse, np.ones((block, block), dtype=np.int64))[:height, :width].astype(np.uint8)


def _value_noise(width: int, height: int, cell: int, rng: np.random.Generator) -> np.ndarray:
    grid = rng.random((height // cell + 2, width // cell + 2))
    return ndi.zoom(grid, cell, order=1)[:height, :width]


def make_background(width: int, height: int, kind: str, rng: np.random.Generator) -> np.ndarray:
    if kind == "gradient":
        xs = np.linspace(30.0, 220.0, width)[None, :]
        ys = np.linspace(-20.0, 20.0, height)[:, None]
        return np.clip(xs + ys, 0, 255)
    # two octaves so the background carries its own structure
    texture = 0.6 * _value_noise(width, height, 32, rng) + 0.4 * _value_noise(width, height, 8, rng)
    return 40.0 + 160.0 * texture


def _scaled_sprite(sprite: PixelPatch, scale: float) -> PixelPatch:
    if scale == 1.0:
        return sprite
    h, w = sprite.shape
    th, tw = max(1, round_half_up(scale * h)), max(1, round_half_up(scale * w))
    out = ndi.zoom(sprite.astype(np.float64), (th / h, tw / w), order=1)[:th, :tw]
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def generate_sequence(frame_size: Tuple[int, int], sprite: PixelPatch, spec: MotionSpec) -> Tuple[List[Frame], List[BBox]]:
    """Frames and exact ground-truth sprite boxes. frame_size is (width, height)."""
    width, height = frame_size
    sprite = as_patch(sprite)
    rng = np.random.default_rng(spec.seed)
    background = make_background(width, height, spec.background, rng)
    sh, sw = sprite.shape
    x, y = spec.start if spec.start is not None else ((width - sw) // 2, (height - sh) // 2)

    frames: List[Frame] = []
    boxes: List[BBox] = []
    for t, (dx, dy) in enumerate(spec.path):
        x, y = x + dx, y + dy
        scale = spec.scale_drift[t] if spec.scale_drift is not None else 1.0
        current = _scaled_sprite(sprite, scale)
        ch, cw = current.shape
        if x < 0 or y < 0 or x + cw > width or y + ch > height:
            raise GenerationError(t, f"sprite box ({x}, {y}, {cw}, {ch}) leaves the {width}x{height} frame")
        canvas = background.copy()
        canvas[y:y + ch, x:x + cw] = current
        if spec.noise_sigma > 0:
            canvas = canvas + rng.normal(0.0, spec.noise_sigma, size=canvas.shape)
        frames.append(np.clip(np.floor(canvas + 0.5), 0, 255).astype(np.uint8))
        boxes.append(BBox(x=x, y=y, w=cw, h=ch))
    logger.debug(f"Generated {len(frames)} frames of {width}x{height}")
    return frames, boxes


def parse_size(text: str) -> Tuple[int, int]:
    match = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if not match:
        raise ConfigurationError(f"Size must look like WIDTHxHEIGHT, got '{text}'")
    return int(match.group(1)), int(match.group(2))


def parse_path(text: str, frames: int, seed: int = 0) -> List[Tuple[int, int]]:
    """`static`, `linear:dx,dy` or `jitter:dx,dy,amp` -> per-frame increments (first is (0, 0))."""
    if frames < 1:
        raise ConfigurationError("frames must be >= 1")
    kind, _, args = text.partition(":")
    try:
        values = [int(v) for v in args.split(",")] if args else []
    except ValueError:
        raise ConfigurationError(f"Bad path arguments in '{text}'")
    if kind == "static" and not values:
        return [(0, 0)] * frames
    if kind == "linear" and len(values) == 2:
        return [(0, 0)] + [(values[0], values[1])] * (frames - 1)
    if kind == "jitter" and len(values) == 3:
        dx, dy, amp = values
        rng = np.random.default_rng(seed)
        jitter = rng.integers(-amp, amp + 1, size=(frames - 1, 2))
        return [(0, 0)] + [(dx + int(jx), dy + int(jy)) for jx, jy in jitter]
    raise ConfigurationError(f"Unknown path '{text}'; use static, linear:dx,dy or jitter:dx,dy,amp")


def write_fixture(out_dir, frames: List[Frame], boxes: List[BBox], fmt: str = "pgm") -> Path:
    """Write frames, the frame-0 seed box file and the ground truth, consumable by `mitfas align`."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    for t, frame in enumerate(frames):
        write_patch(frame, root / patch_filename(t, fmt), fmt)
    seed = boxes[0]
    (root / "bboxes.txt").write_text(f"# frame_index, x, y, w, h\n0,{seed.x},{seed.y},{seed.w},{seed.h}\n",
                                     encoding="utf-8")
    truth = [{"frame_index": t, **b.model_dump()} for t, b in enumerate(boxes)]
    (root / "ground_truth.json").write_text(json.dumps(truth, indent=2), encoding="utf-8")
    logger.info(f"Wrote {len(frames)}-frame fixture to {root}")
    return root
