"""Dataset manifests and patient-aware cross-validation splits.

A manifest is a UTF-8 JSON-lines file: one object per sequence, plus an
optional metadata object. Sequence lines look like

    {"patient_id": "p01", "sequence_id": "s01", "class_label": "tumor",
     "frames": ["frames/p01/s01/frame_00000.pgm", ...]}

and the optional metadata line (anywhere in the file, at most once) is

    {"metadata": {"dataset": "corpus-v2"}}

Frame paths are stored verbatim; relative paths are interpreted
relative to the manifest file's directory by the tools that load
frames. This keeps the format streamable and the files relocatable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ManifestIntegrityError, ManifestParseError, SplitInfeasibleError

CLASS_LABELS = ("tumor", "healthy")


@dataclass(frozen=True)
class SequenceRecord:
    """One ordered frame sequence belonging to a patient."""

    patient_id: str
    sequence_id: str
    frame_refs: tuple[str, ...]
    class_label: str | None = None

    def __post_init__(self):
        if not self.frame_refs:
            raise ManifestIntegrityError(f"sequence {self.sequence_id!r} has no frames")
        if self.class_label is not None and self.class_label not in CLASS_LABELS:
            raise ManifestIntegrityError(
                f"sequence {self.sequence_id!r}: unknown class label {self.class_label!r}"
            )


@dataclass(frozen=True)
class DatasetManifest:
    """Immutable collection of sequences plus free-form metadata."""

    sequences: tuple[SequenceRecord, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        seen: set[str] = set()
        for rec in self.sequences:
            if rec.sequence_id in seen:
                raise ManifestIntegrityError(f"duplicate sequence_id {rec.sequence_id!r}")
            seen.add(rec.sequence_id)

    def patients(self) -> list[str]:
        """Distinct patient ids, sorted."""
        return sorted({rec.patient_id for rec in self.sequences})

    def total_frames(self) -> int:
        return sum(len(rec.frame_refs) for rec in self.sequences)

    def sequence(self, sequence_id: str) -> SequenceRecord:
        for rec in self.sequences:
            if rec.sequence_id == sequence_id:
                return rec
        raise KeyError(sequence_id)


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read a manifest file. Frame files are not opened.

    Raises ManifestParseError (with the line number) for malformed
    lines and ManifestIntegrityError for duplicate sequence ids.
    """
    path = Path(path)
    sequences: list[SequenceRecord] = []
    metadata: dict = {}
    seen_meta = False
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestParseError(f"invalid JSON: {e.msg}", lineno) from e
            if not isinstance(obj, dict):
                raise ManifestParseError("record is not an object", lineno)
            if "metadata" in obj and "sequence_id" not in obj:
                if seen_meta:
                    raise ManifestParseError("duplicate metadata record", lineno)
                if not isinstance(obj["metadata"], dict):
                    raise ManifestParseError("metadata must be an object", lineno)
                metadata = obj["metadata"]
                seen_meta = True
                continue
            try:
                rec = _record_from_json(obj)
            except (KeyError, TypeError, ValueError) as e:
                raise ManifestParseError(str(e), lineno) from e
            if any(rec.sequence_id == r.sequence_id for r in sequences):
                raise ManifestIntegrityError(
                    f"duplicate sequence_id {rec.sequence_id!r} at line {lineno}"
                )
            sequences.append(rec)
    return DatasetManifest(sequences=tuple(sequences), metadata=metadata)


def write_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write a manifest as JSON lines (metadata first when present)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        if manifest.metadata:
            fh.write(json.dumps({"metadata": manifest.metadata}, ensure_ascii=False) + "\n")
        for rec in manifest.sequences:
            obj = {
                "patient_id": rec.patient_id,
                "sequence_id": rec.sequence_id,
                "class_label": rec.class_label,
                "frames": list(rec.frame_refs),
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def _record_from_json(obj: dict) -> SequenceRecord:
    missing = [k for k in ("patient_id", "sequence_id", "frames") if k not in obj]
    if missing:
        raise KeyError(f"missing field(s) {', '.join(missing)}")
    frames = obj["frames"]
    if not isinstance(frames, list) or not all(isinstance(f, str) for f in frames):
        raise TypeError("'frames' must be a list of paths")
    return SequenceRecord(
        patient_id=str(obj["patient_id"]),
        sequence_id=str(obj["sequence_id"]),
        frame_refs=tuple(frames),
        class_label=obj.get("class_label"),
    )


# ---------------------------------------------------------------------------
# Leave-one-patient-out split generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitPlan:
    """One cross-validation fold: a held-out patient and a train/val
    partition of every other patient's sequences."""

    fold_id: int
    test_patient: str
    train_sequences: tuple[str, ...]
    val_sequences: tuple[str, ...]
    seed: int


def make_lopo_splits(
    manifest: DatasetManifest, seed: int, val_fraction: float
) -> list[SplitPlan]:
    """Build one fold per patient, holding that patient out entirely.

    The remaining sequences are partitioned into train and val at
    sequence level. Val size is round(val_fraction * pool size), half
    rounded up. When both class labels occur in the pool, train and
    val must each contain at least one sequence of each class; the
    random partition is repaired with the fewest possible swaps,
    chosen in sequence_id order, and the val size is adjusted
    minimally when the rounded size cannot host both classes.

    Deterministic for fixed (manifest, seed, val_fraction). Raises
    SplitInfeasibleError naming the fold when a class cannot appear in
    both train and val.
    """
    if not 0.0 < val_fraction < 1.0:
        raise ValueError(f"val_fraction must be in (0, 1), got {val_fraction}")
    patients = manifest.patients()
    if len(patients) < 2:
        raise ManifestIntegrityError("need at least 2 patients for leave-one-patient-out")

    plans = []
    for fold_id, test_patient in enumerate(patients):
        pool = sorted(
            (rec for rec in manifest.sequences if rec.patient_id != test_patient),
            key=lambda rec: rec.sequence_id,
        )
        plans.append(_plan_fold(pool, fold_id, test_patient, seed, val_fraction))
    return plans


def _plan_fold(
    pool: list[SequenceRecord],
    fold_id: int,
    test_patient: str,
    seed: int,
    val_fraction: float,
) -> SplitPlan:
    labels = {rec.class_label for rec in pool if rec.class_label is not None}
    enforce_classes = labels >= set(CLASS_LABELS)

    n = len(pool)
    n_val = int(math.floor(val_fraction * n + 0.5))
    if enforce_classes:
        counts = {
            c: sum(1 for rec in pool if rec.class_label == c) for c in CLASS_LABELS
        }
        short = [c for c, k in counts.items() if k < 2]
        if short:
            raise SplitInfeasibleError(
                f"class(es) {', '.join(sorted(short))} have fewer than 2 sequences "
                "outside the test patient; cannot appear in both train and val",
                fold_id,
                test_patient,
            )
        if n < 4:
            raise SplitInfeasibleError(
                f"only {n} non-test sequences; both classes cannot appear "
                "in both train and val",
                fold_id,
                test_patient,
            )
        n_val = min(max(n_val, 2), n - 2)

    rng = np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), fold_id]))
    order = rng.permutation(n)
    val_ids = {pool[i].sequence_id for i in order[:n_val]}
    train_ids = {rec.sequence_id for rec in pool} - val_ids

    if enforce_classes:
        label_of = {rec.sequence_id: rec.class_label for rec in pool}
        _repair_class_presence(train_ids, val_ids, label_of)

    return SplitPlan(
        fold_id=fold_id,
        test_patient=test_patient,
        train_sequences=tuple(sorted(train_ids)),
        val_sequences=tuple(sorted(val_ids)),
        seed=seed,
    )


def _repair_class_presence(
    train_ids: set[str], val_ids: set[str], label_of: dict[str, str | None]
) -> None:
    """Swap sequences between train and val until each side holds every
    class, mutating the two sets in place. Swap partners are picked in
    sequence_id order so the repair is reproducible."""

    def missing(side: set[str]) -> list[str]:
        present = {label_of[s] for s in side}
        return [c for c in CLASS_LABELS if c not in present]

    for _ in range(2 * len(CLASS_LABELS)):
        need_val = missing(val_ids)
        need_train = missing(train_ids)
        if not need_val and not need_train:
            return
        if need_val:
            cls = need_val[0]
            donor = min(s for s in train_ids if label_of[s] == cls)
            # prefer giving back something train is missing, else a
            # sequence val can spare without losing a class
            if need_train:
                victim = min(s for s in val_ids if label_of[s] == need_train[0])
            else:
                victim = _spare_member(val_ids, label_of)
        else:
            cls = need_train[0]
            donor = min(s for s in val_ids if label_of[s] == cls)
            victim = _spare_member(train_ids, label_of)
            donor, victim = victim, donor  # swap direction: victim joins val
        train_ids.discard(donor)
        train_ids.add(victim)
        val_ids.discard(victim)
        val_ids.add(donor)
    raise AssertionError("class-presence repair did not converge")


def _spare_member(side: set[str], label_of: dict[str, str | None]) -> str:
    """Smallest-id member whose removal cannot strip a class from side:
    unlabeled, or labeled with a class that occurs at least twice."""
    counts: dict[str, int] = {}
    for s in side:
        lab = label_of[s]
        if lab is not None:
            counts[lab] = counts.get(lab, 0) + 1
    candidates = [
        s for s in side if label_of[s] is None or counts[label_of[s]] >= 2
    ]
    if not candidates:
        raise AssertionError("no spare sequence to swap out")
    return min(candidates)


def write_split_plans(plans: Iterable[SplitPlan], out_dir: str | Path) -> list[Path]:
    """Write one JSON file per fold; returns the paths written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for plan in plans:
        path = out_dir / f"fold_{plan.fold_id:03d}.json"
        payload = {
            "fold_id": plan.fold_id,
            "test_patient": plan.test_patient,
            "train_sequences": list(plan.train_sequences),
            "val_sequences": list(plan.val_sequences),
            "seed": plan.seed,
        }
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        paths.append(path)
    return paths
