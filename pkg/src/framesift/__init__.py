"""Near-duplicate frame filtering for frame-sequence datasets.

The pipeline: score frame pairs by SSIM on box-downscaled images,
chain key frames through each sequence (a frame is kept when it scores
below tau against the current key), calibrate tau and the scale factor
from labeled pairs, and cut patient-aware train/val folds. A seeded
synthetic-sequence generator provides ground truth for all of it.
"""

from .calibration import (
    HistogramResult,
    LabeledPair,
    OperatingPoint,
    RocCurve,
    RocPoint,
    ScaleSweepResult,
    histogram,
    load_pairs,
    roc,
    score_pairs,
    select_threshold,
    sweep_scales,
    write_calibration_tables,
)
from .errors import (
    CalibrationError,
    DimensionMismatchError,
    FilterInputError,
    FrameDecodeError,
    FrameFormatError,
    FrameSiftError,
    ManifestError,
    ManifestIntegrityError,
    ManifestParseError,
    SplitInfeasibleError,
)
from .filtering import (
    FilterConfig,
    FilterReport,
    SequenceFilterResult,
    classify_pair,
    filter_dataset,
    filter_sequence,
    reduction_stats,
    write_filtered_output,
    write_report,
)
from .frames import Frame, load_frame, rgb_to_gray, save_frame
from .imaging import (
    ScaleFactor,
    SsimParams,
    SsimResult,
    downscale,
    pair_score,
    ssim,
    ssim_result,
)
from .manifest import (
    CLASS_LABELS,
    DatasetManifest,
    SequenceRecord,
    SplitPlan,
    load_manifest,
    make_lopo_splits,
    write_manifest,
    write_split_plans,
)
from .synth import (
    SynthConfig,
    SynthGroundTruth,
    build_corpus,
    generate_labeled_pairs,
    generate_sequence,
    load_ground_truth,
    plant_redundancy_corpus,
)

__version__ = "0.1.0"

__all__ = [
    "CLASS_LABELS",
    "CalibrationError",
    "DatasetManifest",
    "DimensionMismatchError",
    "FilterConfig",
    "FilterInputError",
    "FilterReport",
    "Frame",
    "FrameDecodeError",
    "FrameFormatError",
    "FrameSiftError",
    "HistogramResult",
    "LabeledPair",
    "ManifestError",
    "ManifestIntegrityError",
    "ManifestParseError",
    "OperatingPoint",
    "RocCurve",
    "RocPoint",
    "ScaleFactor",
    "ScaleSweepResult",
    "SequenceFilterResult",
    "SequenceRecord",
    "SplitInfeasibleError",
    "SplitPlan",
    "SsimParams",
    "SsimResult",
    "SynthConfig",
    "SynthGroundTruth",
    "build_corpus",
    "classify_pair",
    "downscale",
    "filter_dataset",
    "filter_sequence",
    "generate_labeled_pairs",
    "generate_sequence",
    "histogram",
    "load_frame",
    "load_ground_truth",
    "load_manifest",
    "load_pairs",
    "make_lopo_splits",
    "pair_score",
    "plant_redundancy_corpus",
    "reduction_stats",
    "rgb_to_gray",
    "roc",
    "save_frame",
    "score_pairs",
    "select_threshold",
    "ssim",
    "ssim_result",
    "sweep_scales",
    "write_calibration_tables",
    "write_filtered_output",
    "write_manifest",
    "write_report",
    "write_split_plans",
]
