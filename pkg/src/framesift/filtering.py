"""Key-frame filtering of frame sequences.

Each sequence is walked front to back. The first frame becomes the
key; every subsequent frame is compared against the current key with
the downscaled-SSIM pair score. A frame scoring below the threshold
tau is novel: it is kept and becomes the new key. Everything else is
a near-duplicate and dropped. Comparisons are always against the
current key (not the previous frame) so slow drift accumulates until
it crosses the threshold.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator, Literal

from .errors import DimensionMismatchError, FilterInputError, FrameSiftError
from .frames import Frame, load_frame
from .imaging import ScaleFactor, SsimParams, pair_score
from .manifest import DatasetManifest, SequenceRecord, write_manifest

logger = logging.getLogger(__name__)

OutputMode = Literal["manifest_only", "copy", "link"]


@dataclass(frozen=True)
class FilterConfig:
    """Decision threshold and scoring parameters for the filter.

    tau is the SSIM threshold: scores strictly below it mark a novel
    frame, a score equal to tau still counts as a duplicate. Scores
    live in [-1, 1], so tau = -1 keeps only the first frame and any
    tau > 1 keeps everything. The defaults (tau 0.411, 1/32 scale)
    come from calibration on noisy grayscale endoscopy video and
    should be re-calibrated for other material.
    """

    tau: float = 0.411
    scale: ScaleFactor = ScaleFactor(32)
    ssim: SsimParams = SsimParams()


@dataclass(frozen=True)
class SequenceFilterResult:
    """Kept frame indices for one sequence."""

    sequence_id: str
    kept_indices: tuple[int, ...]
    total_frames: int


@dataclass(frozen=True)
class FilterReport:
    """Corpus-level reduction statistics."""

    per_sequence: tuple[SequenceFilterResult, ...]
    frames_in: int
    frames_out: int
    kept_fraction: float | None
    reduction_factor: float | None
    warnings: tuple[str, ...] = field(default=())

    @classmethod
    def from_results(cls, results: Iterable[SequenceFilterResult]) -> "FilterReport":
        results = tuple(results)
        frames_in = sum(r.total_frames for r in results)
        frames_out = sum(len(r.kept_indices) for r in results)
        kept, reduction = reduction_stats(frames_in, frames_out)
        return cls(
            per_sequence=results,
            frames_in=frames_in,
            frames_out=frames_out,
            kept_fraction=kept,
            reduction_factor=reduction,
        )


def reduction_stats(frames_in: int, frames_out: int) -> tuple[float | None, float | None]:
    """(kept_fraction, reduction_factor) for the given corpus totals;
    None for an empty corpus."""
    if frames_in == 0 or frames_out == 0:
        return None, None
    return frames_out / frames_in, frames_in / frames_out


def classify_pair(key: Frame, candidate: Frame, config: FilterConfig) -> str:
    """'novel' iff the pair score falls strictly below tau, else 'duplicate'."""
    score = pair_score(key, candidate, config.scale, config.ssim)
    return "novel" if score < config.tau else "duplicate"


def filter_sequence(
    frames: Iterable[Frame], config: FilterConfig, sequence_id: str = ""
) -> SequenceFilterResult:
    """Run the key-frame chain over one ordered sequence.

    Frames may be a lazy iterable; only the current key and candidate
    are held at any time. Raises on an empty sequence, and names the
    offending index on a dimension mismatch.
    """
    iterator = iter(frames)
    try:
        key = next(iterator)
    except StopIteration:
        raise ValueError(f"sequence {sequence_id!r} is empty") from None
    kept = [0]
    total = 1
    for index, candidate in enumerate(iterator, start=1):
        total += 1
        try:
            verdict = classify_pair(key, candidate, config)
        except DimensionMismatchError as e:
            raise DimensionMismatchError(
                f"sequence {sequence_id!r} frame {index}: {e}"
            ) from e
        if verdict == "novel":
            kept.append(index)
            key = candidate
    return SequenceFilterResult(
        sequence_id=sequence_id, kept_indices=tuple(kept), total_frames=total
    )


def filter_dataset(
    manifest: DatasetManifest,
    config: FilterConfig,
    base_dir: str | Path | None = None,
    workers: int = 1,
) -> tuple[FilterReport, DatasetManifest]:
    """Filter every sequence of a dataset independently.

    base_dir anchors relative frame paths (use the manifest file's
    directory). Distinct sequences may be processed concurrently; the
    report and filtered manifest are assembled in manifest order, so
    results do not depend on the worker count. Any unloadable frame
    aborts the whole run with an error naming sequence and index.
    """

    def run_one(record: SequenceRecord) -> SequenceFilterResult:
        return filter_sequence(
            _load_frames(record, base_dir), config, sequence_id=record.sequence_id
        )

    if workers > 1 and len(manifest.sequences) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, manifest.sequences))
    else:
        results = [run_one(rec) for rec in manifest.sequences]

    filtered = DatasetManifest(
        sequences=tuple(
            replace(rec, frame_refs=tuple(rec.frame_refs[i] for i in res.kept_indices))
            for rec, res in zip(manifest.sequences, results)
        ),
        metadata=dict(manifest.metadata),
    )
    return FilterReport.from_results(results), filtered


def _load_frames(
    record: SequenceRecord, base_dir: str | Path | None
) -> Iterator[Frame]:
    for index, ref in enumerate(record.frame_refs):
        try:
            yield load_frame(ref, base_dir)
        except (FrameSiftError, OSError) as e:
            raise FilterInputError(
                f"sequence {record.sequence_id!r} frame {index} ({ref}): {e}"
            ) from e


def write_filtered_output(
    report: FilterReport,
    filtered: DatasetManifest,
    out_dir: str | Path,
    mode: OutputMode = "manifest_only",
    base_dir: str | Path | None = None,
) -> FilterReport:
    """Materialize filter results under out_dir.

    mode="manifest_only" writes nothing but the filtered manifest.
    "copy" and "link" additionally place the kept frames in a
    frames/<patient>/<sequence>/ tree and point the written manifest
    at those files; "link" hard-links where the filesystem allows it
    and degrades to copying, noting the fallback in the returned
    report's warnings. The summary report is written separately by
    write_report.
    """
    if mode not in ("manifest_only", "copy", "link"):
        raise ValueError(f"unknown output mode {mode!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    warnings = list(report.warnings)
    if mode in ("copy", "link"):
        filtered = _materialize_frames(filtered, out_dir, mode, base_dir, warnings)

    write_manifest(filtered, out_dir / "manifest.jsonl")
    return replace(report, warnings=tuple(warnings))


def _materialize_frames(
    filtered: DatasetManifest,
    out_dir: Path,
    mode: OutputMode,
    base_dir: str | Path | None,
    warnings: list[str],
) -> DatasetManifest:
    from .frames import resolve_locator

    link_failed = False
    new_records = []
    for rec in filtered.sequences:
        seq_dir = out_dir / "frames" / rec.patient_id / rec.sequence_id
        seq_dir.mkdir(parents=True, exist_ok=True)
        new_refs = []
        for ref in rec.frame_refs:
            src = resolve_locator(ref, base_dir)
            dst = seq_dir / f"{len(new_refs):06d}_{Path(ref).name}"
            try:
                if mode == "link" and not link_failed:
                    try:
                        os.link(src, dst)
                    except OSError:
                        link_failed = True
                        warnings.append(
                            "hard links not supported at destination; fell back to copy"
                        )
                        shutil.copyfile(src, dst)
                else:
                    shutil.copyfile(src, dst)
            except OSError as e:
                raise FilterInputError(
                    f"sequence {rec.sequence_id!r}: cannot write {dst}: {e}"
                ) from e
            new_refs.append(str(dst.relative_to(out_dir)))
        new_records.append(replace(rec, frame_refs=tuple(new_refs)))
    return DatasetManifest(sequences=tuple(new_records), metadata=dict(filtered.metadata))


def write_report(report: FilterReport, out_dir: str | Path) -> None:
    """Write report.json (corpus totals) and per_sequence.csv
    (sequence_id, total, kept count, kept indices) under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {
        "frames_in": report.frames_in,
        "frames_out": report.frames_out,
        "kept_fraction": report.kept_fraction,
        "reduction_factor": report.reduction_factor,
        "num_sequences": len(report.per_sequence),
        "warnings": list(report.warnings),
    }
    (out_dir / "report.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )
    with (out_dir / "per_sequence.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sequence_id", "total_frames", "kept_count", "kept_indices"])
        for res in report.per_sequence:
            writer.writerow(
                [
                    res.sequence_id,
                    res.total_frames,
                    len(res.kept_indices),
                    " ".join(str(i) for i in res.kept_indices),
                ]
            )
