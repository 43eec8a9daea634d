# src/mitfas/manifest_store.py
"""Run manifest: what was run, on which input, with which result. Stored as one JSON document."""
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Dict, List, Sequence

import json5
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from mitfas import __version__
from mitfas.alignment import AlignmentTrace
from mitfas.errors import ManifestError, SchemaVersionError
from mitfas.sampling import SampleResult
from mitfas.tools.frame_io import fnv1a_64
from mitfas.transforms import Frame
from mitfas.utils.logger import get_logger

logger = get_logger("manifest_store")

SCHEMA_VERSION = 1
TIMING_FIELDS = {"timings"}


class InputFingerprint(BaseModel):
    model_config = ConfigDict(frozen=True)

    frame_count: int
    width: int
    height: int
    channels: int = 1
    frame_hashes: List[str] = Field(default_factory=list, description="FNV-1a 64 of each frame's raw bytes, hex")


class RunManifest(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    schema_version: int = SCHEMA_VERSION
    tool_version: str = __version__
    config: Dict[str, Any] = Field(default_factory=dict, description="Effective configuration snapshot")
    fingerprint: InputFingerprint
    trace: AlignmentTrace
    sample: SampleResult
    timings: Dict[str, float] = Field(default_factory=dict, description="Wall-clock seconds per stage")


def _frame_hash(frame: Frame) -> str:
    return f"{fnv1a_64(frame.tobytes()):016x}"


def fingerprint_frames(frames: Sequence[Frame], workers: int = 1) -> InputFingerprint:
    """Frame count, size and per-frame FNV-1a hashes. workers > 1 hashes in separate processes."""
    first = frames[0]
    if workers > 1 and len(frames) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            hashes = list(pool.map(_frame_hash, frames))
    else:
        hashes = [_frame_hash(f) for f in frames]
    return InputFingerprint(
        frame_count=len(frames),
        width=int(first.shape[1]),
        height=int(first.shape[0]),
        channels=1 if first.ndim == 2 else int(first.shape[2]),
        frame_hashes=hashes,
    )


def behavioral_fields(manifest: RunManifest) -> Dict[str, Any]:
    """Everything except the informational timings."""
    return manifest.model_dump(exclude=TIMING_FIELDS)


def write_manifest(manifest: RunManifest, path) -> Path:
    target = Path(path)
    target.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.debug(f"Manifest written to {target}")
    return target


def read_manifest(path) -> RunManifest:
    source = Path(path)
    try:
        data = json5.loads(source.read_text(encoding="utf-8"))
    except OSError as e:
        raise ManifestError(f"Cannot read manifest {source}: {e}") from e
    except ValueError as e:
        raise ManifestError(f"Manifest {os.path.basename(source)} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ManifestError(f"Manifest {source.name} must be an object")

    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(version, SCHEMA_VERSION)
    unknown = sorted(set(data) - set(RunManifest.model_fields))
    if unknown:
        logger.warning(f"Ignoring unknown manifest fields: {unknown}")
        data = {k: v for k, v in data.items() if k not in unknown}
    try:
        return RunManifest.model_validate(data)
    except ValidationError as e:
        raise ManifestError(f"Manifest {source.name} is malformed: {e}") from e
