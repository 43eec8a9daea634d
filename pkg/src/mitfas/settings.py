# src/mitfas/settings.py
"""
Layered configuration: packaged defaults.yaml -> optional --config file -> command-line flags.
The flat key/value form is what the manifest snapshots.
"""
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional

import json5
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from mitfas.alignment import SearchConfig
from mitfas.errors import ConfigurationError
from mitfas.sampling import SamplerKind, SamplingConfig
from mitfas.tools.frame_io import PATCH_FORMATS
from mitfas.utils.logger import get_logger

logger = get_logger("settings")

DEFAULTS_FILE = Path(__file__).resolve().parent / "config" / "defaults.yaml"
THREADS_ENV = "MITFAS_THREADS"

# flat key -> (section, field)
SEARCH_KEYS = {
    "bins": "bins",
    "stride": "stride",
    "scales": "scale_set",
    "thetas": "theta_set",
    "expansion": "search_expansion",
    "relocalize_every": "relocalize_every",
    "relocalize_mi_floor": "relocalize_mi_floor",
    "measure": "measure",
    "refine": "refine",
    "reference_width_ratio": "reference_width_ratio",
    "reference_height_ratio": "reference_height_ratio",
    "reference_top_margin": "reference_top_margin",
}
SAMPLING_KEYS = {
    "alpha": "alpha",
    "beta": "beta",
    "n_frames": "n_frames",
    "bins": "bins",
    "seed": "seed",
    "stride_max": "stride_max",
}
PIPELINE_KEYS = {"sampler", "sample_raw", "patch_format"}
KNOWN_KEYS = set(SEARCH_KEYS) | set(SAMPLING_KEYS) | PIPELINE_KEYS


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    search: SearchConfig = Field(default_factory=SearchConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    sampler: SamplerKind = "mis"
    sample_raw: bool = Field(default=False, description="Sample raw grayscale frames instead of aligned patches")
    patch_format: Literal["pgm", "png"] = "pgm"
    threads: int = Field(default=1, description="Worker threads for search, scoring and decoding")

    def snapshot(self) -> Dict[str, Any]:
        """Flat key/value form; build_config(overrides=snapshot) rebuilds an equal config."""
        search = self.search.model_dump()
        sampling = self.sampling.model_dump()
        flat = {key: search[field] for key, field in SEARCH_KEYS.items()}
        flat.update({key: sampling[field] for key, field in SAMPLING_KEYS.items()})
        flat.update(sampler=self.sampler, sample_raw=self.sample_raw, patch_format=self.patch_format)
        return flat


def _split_list(value) -> List[float]:
    if isinstance(value, str):
        return [float(v) for v in value.split(",") if v.strip()]
    if isinstance(value, (int, float)):
        return [float(value)]
    return [float(v) for v in value]


def load_config_file(path) -> Dict[str, Any]:
    """YAML, or JSON/JSON5 by extension; the document must be a flat mapping."""
    source = Path(path)
    if not source.is_file():
        raise ConfigurationError(f"Config file not found: {source}")
    text = source.read_text(encoding="utf-8")
    try:
        if source.suffix.lower() in (".json", ".json5"):
            data = json5.loads(text)
        else:
            data = yaml.safe_load(text)
    except (ValueError, yaml.YAMLError) as e:
        raise ConfigurationError(f"Could not parse config file {source.name}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {source.name} must hold a mapping of keys to values")
    return data


def threads_from_env() -> int:
    raw = os.getenv(THREADS_ENV)
    if raw is None or not raw.strip():
        return 1
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got '{raw}'")
    if threads < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got '{raw}'")
    return threads


def merge_layers(*layers: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    merged: Dict[str, Any] = {}
    for layer in layers:
        if not layer:
            continue
        unknown = sorted(set(layer) - KNOWN_KEYS)
        if unknown:
            raise ConfigurationError(f"Unknown configuration keys: {unknown}")
        merged.update(layer)
    return merged


def build_config(config_file=None, overrides: Optional[Mapping[str, Any]] = None,
                 threads: Optional[int] = None) -> PipelineConfig:
    """defaults.yaml, then `config_file`, then `overrides` (None values in overrides are skipped)."""
    load_dotenv()
    defaults = load_config_file(DEFAULTS_FILE)
    from_file = load_config_file(config_file) if config_file else None
    flags = {k: v for k, v in (overrides or {}).items() if v is not None}
    values = merge_layers(defaults, from_file, flags)
    threads = threads if threads is not None else threads_from_env()

    try:
        for key in ("scales", "thetas"):
            values[key] = _split_list(values[key])
        search = SearchConfig(workers=threads, **{field: values[key] for key, field in SEARCH_KEYS.items()})
        sampling = SamplingConfig(workers=threads, **{field: values[key] for key, field in SAMPLING_KEYS.items()})
        config = PipelineConfig(search=search, sampling=sampling, sampler=values["sampler"],
                                sample_raw=bool(values["sample_raw"]), patch_format=values["patch_format"],
                                threads=threads)
    except (ValidationError, TypeError, ValueError) as e:
        raise ConfigurationError(f"Invalid configuration: {e}") from e
    if config.patch_format not in PATCH_FORMATS:
        raise ConfigurationError(f"Unsupported patch format '{config.patch_format}'")
    logger.debug(f"Effective configuration: {config.snapshot()} (threads={threads})")
    return config
