# src/mitfas/tools/measure_tool.py
from typing import Callable, Dict, List, Literal

from pydantic import BaseModel, ConfigDict, Field

from mitfas.errors import ConfigurationError
from mitfas.mi_core import DEFAULT_BINS, mutual_information
from mitfas.similarity_baselines import cosine_similarity, euclidean_distance, psnr, ssim

Polarity = Literal["maximize", "minimize"]


class Measure(BaseModel):
    """A patch measure plus the direction the alignment search should optimize it in."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    polarity: Polarity
    func: Callable = Field(..., description="func(a, b, bins) -> float")
    description: str = ""

    def __call__(self, a, b, bins: int = DEFAULT_BINS) -> float:
        return self.func(a, b, bins)

    @property
    def maximize(self) -> bool:
        return self.polarity == "maximize"

    def is_better(self, score: float, other: float) -> bool:
        return score > other if self.maximize else score < other


def _ignore_bins(func: Callable) -> Callable:
    def wrapped(a, b, bins: int = DEFAULT_BINS) -> float:
        return func(a, b)
    wrapped.__name__ = func.__name__
    return wrapped


class MeasureTool:
    """Dispatcher from measure names to implementations. Maps 'name' to funcs with a polarity flag."""
    measure_map: Dict[str, Measure] = {
        "mi": Measure(name="mi", polarity="maximize", func=mutual_information,
                      description="Histogram mutual information in bits"),
        "euclidean": Measure(name="euclidean", polarity="minimize", func=_ignore_bins(euclidean_distance),
                             description="L2 distance between intensities"),
        "cosine": Measure(name="cosine", polarity="maximize", func=_ignore_bins(cosine_similarity),
                          description="Cosine of the angle between intensity vectors"),
        "psnr": Measure(name="psnr", polarity="maximize", func=_ignore_bins(psnr),
                        description="Peak signal-to-noise ratio in dB"),
        "ssim": Measure(name="ssim", polarity="maximize", func=_ignore_bins(ssim),
                        description="Mean SSIM over 8x8 windows"),
    }

    @classmethod
    def names(cls) -> List[str]:
        return list(cls.measure_map)

    @classmethod
    def get(cls, name: str) -> Measure:
        if name not in cls.measure_map:
            raise ConfigurationError(f"Unknown measure '{name}'. Available: {', '.join(cls.names())}")
        return cls.measure_map[name]


def get_measure(name: str) -> Measure:
    return MeasureTool.get(name)
