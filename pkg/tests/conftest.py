"""Shared helpers for the test suite."""

from pathlib import Path

import numpy as np
import pytest

from framesift import DatasetManifest, Frame, SequenceRecord, save_frame, write_manifest


def frame_of(array) -> Frame:
    """Build a Frame from any integer array-like."""
    return Frame(pixels=np.asarray(array, dtype=np.uint8))


def const_frame(value: int, shape=(8, 8)) -> Frame:
    return Frame(pixels=np.full(shape, value, dtype=np.uint8))


def random_frame(rng: np.random.Generator, shape=(8, 8)) -> Frame:
    return Frame(pixels=rng.integers(0, 256, shape, dtype=np.uint8))


def write_corpus(out_dir: Path, sequences: dict[str, tuple[str, list[Frame]]]) -> Path:
    """Write frames and a manifest for {seq_id: (patient_id, frames)}.

    Returns the manifest path; frame refs are relative to out_dir.
    """
    records = []
    for seq_id, (patient_id, frames) in sequences.items():
        refs = []
        for i, frame in enumerate(frames):
            rel = f"frames/{patient_id}/{seq_id}/{i:04d}.pgm"
            save_frame(frame, out_dir / rel)
            refs.append(rel)
        records.append(
            SequenceRecord(
                patient_id=patient_id,
                sequence_id=seq_id,
                class_label=None,
                frame_refs=tuple(refs),
            )
        )
    manifest = DatasetManifest(sequences=tuple(records))
    path = out_dir / "manifest.jsonl"
    write_manifest(manifest, path)
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
