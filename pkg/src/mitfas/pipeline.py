# src/mitfas/pipeline.py
"""
End-to-end run: load -> grayscale -> align -> sample -> write.

Everything is written into a staging directory inside `out_dir` and moved into place only
after the last stage succeeds, so a failed run leaves no partial outputs and no manifest.
"""
import logging
import shutil
import tempfile
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, Optional

from mitfas.alignment import align_sequence
from mitfas.errors import ConfigurationError
from mitfas.manifest_store import RunManifest, fingerprint_frames, write_manifest
from mitfas.sampling import run_sampler
from mitfas.settings import PipelineConfig
from mitfas.tools.frame_io import (
    AnnotationDetector,
    list_frame_files,
    load_bboxes,
    load_frames,
    patch_filename,
    seed_box,
    write_patch,
)
from mitfas.transforms import to_grayscale
from mitfas.utils.logger import LOGGER_NAME, attach_file_handler, detach_handler, get_logger

logger = get_logger("pipeline")

MANIFEST_NAME = "manifest.json"
TRACE_NAME = "trace.csv"
LOG_NAME = "mitfas.log"


@contextmanager
def _stage(name: str, timings: Dict[str, float]) -> Iterator[None]:
    start = time.perf_counter()
    logger.info(f"Stage '{name}' started")
    yield
    timings[name] = round(time.perf_counter() - start, 6)
    logger.info(f"Stage '{name}' finished in {timings[name]:.3f}s")


def _publish(staging: Path, out_dir: Path) -> None:
    for entry in sorted(staging.iterdir()):
        target = out_dir / entry.name
        if target.is_dir():
            shutil.rmtree(target)
        elif target.exists():
            target.unlink()
        shutil.move(str(entry), str(target))


def run_pipeline(frames_dir, bbox_file, out_dir, config: Optional[PipelineConfig] = None) -> RunManifest:
    config = config or PipelineConfig()
    out_dir = Path(out_dir)
    n_frames = config.sampling.n_frames

    frame_count = len(list_frame_files(frames_dir))
    if n_frames > frame_count:
        raise ConfigurationError(f"n_frames={n_frames} exceeds the {frame_count} frames in {frames_dir}")

    created = not out_dir.exists()
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".mitfas-staging-", dir=out_dir))
    root_logger = logging.getLogger(LOGGER_NAME)
    log_handler = attach_file_handler(root_logger, str(staging / LOG_NAME))
    timings: Dict[str, float] = {}

    try:
        with _stage("load", timings):
            frames = load_frames(frames_dir, workers=config.threads)
            height, width = frames[0].shape[:2]
            annotations = load_bboxes(bbox_file, frame_size=(width, height), frame_count=len(frames))
            detector = AnnotationDetector(annotations)
            fingerprint = fingerprint_frames(frames, workers=config.threads)

        with _stage("grayscale", timings):
            grays = [to_grayscale(f) for f in frames]

        with _stage("align", timings):
            trace, aligned = align_sequence(grays, seed_box(annotations), config.search,
                                            detector=detector if len(detector) else None)

        with _stage("sample", timings):
            source = grays if config.sample_raw else aligned
            sample = run_sampler(config.sampler, source, config.sampling)

        with _stage("write", timings):
            fmt = config.patch_format
            (staging / "aligned").mkdir()
            (staging / "sampled").mkdir()
            for t, patch in enumerate(aligned):
                write_patch(patch, staging / "aligned" / patch_filename(t, fmt), fmt)
            for k in sample.indices:
                target = staging / "sampled" / patch_filename(k, fmt)
                if config.sample_raw:
                    write_patch(grays[k], target, fmt)
                else:
                    shutil.copyfile(staging / "aligned" / patch_filename(k, fmt), target)
            trace.to_frame().to_csv(staging / TRACE_NAME, index=False)

        manifest = RunManifest(config=config.snapshot(), fingerprint=fingerprint, trace=trace,
                               sample=sample, timings=timings)
        write_manifest(manifest, staging / MANIFEST_NAME)
        detach_handler(root_logger, log_handler)
        log_handler = None
        _publish(staging, out_dir)
    except BaseException:
        logger.error(f"Run failed; removing partial outputs under {out_dir}")
        raise
    finally:
        detach_handler(root_logger, log_handler)
        shutil.rmtree(staging, ignore_errors=True)
        if created and out_dir.exists() and not any(out_dir.iterdir()):
            out_dir.rmdir()

    logger.info(f"Run complete: {len(aligned)} aligned patches, sampled {sample.indices}, outputs in {out_dir}")
    return manifest
