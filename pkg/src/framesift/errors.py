"""Exception types shared across the package."""


class FrameSiftError(Exception):
    """Base class for all framesift errors."""


class FrameFormatError(FrameSiftError):
    """Raised when a frame file is not in a supported format."""


class FrameDecodeError(FrameSiftError):
    """Raised when a frame file is recognized but cannot be decoded."""


class ManifestError(FrameSiftError):
    """Base class for manifest problems."""


class ManifestParseError(ManifestError):
    """A manifest line failed to parse."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class ManifestIntegrityError(ManifestError):
    """The manifest parsed but violates a structural invariant."""


class DimensionMismatchError(FrameSiftError, ValueError):
    """Two frames that must share dimensions do not."""


class SplitInfeasibleError(FrameSiftError):
    """A cross-validation fold cannot satisfy its constraints."""

    def __init__(self, message: str, fold_id: int, test_patient: str):
        super().__init__(f"fold {fold_id} (test patient {test_patient!r}): {message}")
        self.fold_id = fold_id
        self.test_patient = test_patient


class FilterInputError(FrameSiftError):
    """A frame referenced by the dataset could not be loaded for filtering."""


class CalibrationError(FrameSiftError):
    """Calibration input or target is unusable (single class, empty, etc.)."""
