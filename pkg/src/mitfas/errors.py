# src/mitfas/errors.py
from typing import Optional, Sequence


class MitfasError(Exception):
    """Base class for all mitfas errors. `exit_code` is what the CLI returns."""
    exit_code: int = 4


class ConfigurationError(MitfasError, ValueError):
    exit_code = 2


class InputError(MitfasError, ValueError):
    exit_code = 3


class ComputationError(MitfasError, RuntimeError):
    exit_code = 4


# --- input errors ---

class ShapeMismatchError(InputError):
    def __init__(self, shape_a, shape_b):
        self.shape_a = tuple(shape_a)
        self.shape_b = tuple(shape_b)
        super().__init__(f"Patch shapes differ: {self.shape_a} vs {self.shape_b}")


class FrameFormatError(InputError):
    pass


class SequenceGapError(InputError):
    def __init__(self, missing_index: int):
        self.missing_index = missing_index
        super().__init__(f"Frame sequence has a gap: index {missing_index} is missing")


class FrameDecodeError(InputError):
    def __init__(self, filename: str, reason: str):
        self.filename = filename
        super().__init__(f"Could not decode frame '{filename}': {reason}")


class AnnotationParseError(InputError):
    def __init__(self, location: str, reason: str):
        self.location = location
        super().__init__(f"Bad annotation at {location}: {reason}")


class AnnotationValidationError(InputError):
    pass


class ManifestError(InputError):
    pass


class SchemaVersionError(ManifestError):
    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(f"Manifest schema version {found!r} is not supported (expected {expected})")


# --- computation errors ---

class EmptyHistogramError(ComputationError):
    pass


class InvalidDistributionError(ComputationError):
    pass


class CapacityError(ComputationError):
    def __init__(self, cells: int, limit: int):
        self.cells = cells
        self.limit = limit
        super().__init__(f"Joint table of {cells} cells exceeds the limit of {limit} cells (2^20)")


class PreconditionError(ComputationError):
    pass


class OutOfRangeError(ComputationError):
    pass


class SearchFailureError(ComputationError):
    def __init__(self, search_area, frame_index: Optional[int] = None, reason: str = "empty search grid"):
        self.search_area = search_area
        self.frame_index = frame_index
        where = f" at frame {frame_index}" if frame_index is not None else ""
        super().__init__(f"Window search failed{where}: {reason} (search area {search_area})")


class DetectorError(ComputationError):
    def __init__(self, frame_index: int, reason: str):
        self.frame_index = frame_index
        super().__init__(f"Detector hook failed at frame {frame_index}: {reason}")


class PoolExhaustedError(ComputationError):
    def __init__(self, step: Optional[int] = None, indices: Sequence[int] = (), reason: str = ""):
        self.step = step
        self.indices = list(indices)
        where = f" at step {step}" if step is not None else ""
        detail = f": {reason}" if reason else ""
        super().__init__(f"Candidate pool exhausted{where}{detail}; picked so far: {self.indices}")


class UndefinedSimilarityError(ComputationError):
    pass


class GenerationError(ComputationError):
    def __init__(self, step: int, reason: str):
        self.step = step
        super().__init__(f"Synthetic generation failed at step {step}: {reason}")
