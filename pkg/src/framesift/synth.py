"""Synthetic frame sequences with known ground truth.

Generates corpora that look statistically like noisy grayscale video:
each scene is an independent smoothed random texture (white noise box
blurred at a chosen grain, contrast-stretched to [0, 255]); frames
within a scene are that texture translated by cumulative integer
drift (wrap-around) with i.i.d. Gaussian pixel noise added and
clamped. Scene boundaries, per-frame scene ids, and planted
redundancy factors are all recorded, so the filter and the calibrator
can be verified end to end without any real footage.

Randomness comes exclusively from numpy's PCG64 generator seeded from
the config, so identical configs reproduce bit-identical frames.
Corpus builders derive one child generator per sequence via
SeedSequence([seed, sequence_index]).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.ndimage import uniform_filter

from .frames import Frame, save_frame
from .manifest import DatasetManifest, SequenceRecord, write_manifest

FramesPerScene = int | tuple[int, int] | Sequence[int]


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the generative model.

    frames_per_scene may be a fixed count, an inclusive (lo, hi) range
    sampled per scene, or an explicit per-scene list of counts (which
    pins scene boundaries exactly).
    """

    frame_size: int = 128
    num_scenes: int = 5
    frames_per_scene: FramesPerScene = 6
    noise_sigma: float = 8.0
    drift_step: int = 0
    texture_grain: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.frame_size < 1:
            raise ValueError(f"frame_size must be >= 1, got {self.frame_size}")
        if self.num_scenes < 1:
            raise ValueError(f"num_scenes must be >= 1, got {self.num_scenes}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.drift_step < 0:
            raise ValueError("drift_step must be >= 0")
        if self.texture_grain < 1:
            raise ValueError("texture_grain must be >= 1")
        _validate_counts(self.frames_per_scene, self.num_scenes)


def _validate_counts(counts: FramesPerScene, num_scenes: int) -> None:
    if isinstance(counts, int):
        if counts < 1:
            raise ValueError("frames_per_scene must be >= 1")
    elif isinstance(counts, tuple) and len(counts) == 2 and all(
        isinstance(c, int) for c in counts
    ):
        lo, hi = counts
        if lo < 1 or hi < lo:
            raise ValueError(f"bad frames_per_scene range {counts}")
    else:
        counts = list(counts)
        if len(counts) != num_scenes:
            raise ValueError(
                f"frames_per_scene list has {len(counts)} entries for {num_scenes} scenes"
            )
        if any(c < 1 for c in counts):
            raise ValueError("every scene needs at least 1 frame")


@dataclass(frozen=True)
class SynthGroundTruth:
    """Scene structure of a generated sequence."""

    scene_start_indices: tuple[int, ...]
    scene_ids: tuple[int, ...]


def generate_sequence(
    config: SynthConfig, rng: np.random.Generator | None = None
) -> tuple[list[Frame], SynthGroundTruth]:
    """Generate one sequence and its ground truth."""
    if rng is None:
        rng = np.random.default_rng(np.random.PCG64(config.seed & (2**64 - 1)))
    counts = _scene_counts(config, rng)

    frames: list[Frame] = []
    scene_ids: list[int] = []
    starts: list[int] = []
    for scene, count in enumerate(counts):
        starts.append(len(frames))
        texture = _texture(rng, config.frame_size, config.texture_grain)
        for j in range(count):
            shift = config.drift_step * j
            base = np.roll(texture, (shift, shift), axis=(0, 1)) if shift else texture
            frames.append(Frame(pixels=_add_noise(base, config.noise_sigma, rng)))
            scene_ids.append(scene)
    return frames, SynthGroundTruth(
        scene_start_indices=tuple(starts), scene_ids=tuple(scene_ids)
    )


def _scene_counts(config: SynthConfig, rng: np.random.Generator) -> list[int]:
    fps = config.frames_per_scene
    if isinstance(fps, int):
        return [fps] * config.num_scenes
    if isinstance(fps, tuple) and len(fps) == 2 and all(isinstance(c, int) for c in fps):
        lo, hi = fps
        return [int(rng.integers(lo, hi + 1)) for _ in range(config.num_scenes)]
    return [int(c) for c in fps]


def _texture(rng: np.random.Generator, size: int, grain: int) -> np.ndarray:
    """Smoothed random texture stretched to the full 8-bit range."""
    noise = rng.standard_normal((size, size))
    smooth = uniform_filter(noise, size=min(grain, size), mode="wrap")
    lo, hi = float(smooth.min()), float(smooth.max())
    if hi <= lo:
        return np.full((size, size), 128, dtype=np.uint8)
    stretched = (smooth - lo) / (hi - lo) * 255.0
    return np.floor(stretched + 0.5).astype(np.uint8)


def _add_noise(base: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    if sigma == 0:
        return base.copy()
    noisy = base.astype(np.float64) + rng.normal(0.0, sigma, base.shape)
    return np.clip(np.rint(noisy), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# Corpus builders (frames on disk + manifest + ground-truth sidecar)
# ---------------------------------------------------------------------------

def build_corpus(
    out_dir: str | Path,
    config: SynthConfig,
    num_sequences: int = 4,
    num_patients: int = 2,
) -> tuple[DatasetManifest, dict[str, SynthGroundTruth]]:
    """Write a multi-sequence corpus under out_dir.

    Layout: frames/<patient>/<sequence>/frame_<i>.pgm, manifest.jsonl
    with paths relative to out_dir, and ground_truth.json mapping each
    sequence to its scene boundaries. Sequences are assigned to
    patients round-robin.
    """
    if num_sequences < 1 or num_patients < 1:
        raise ValueError("need at least one sequence and one patient")
    out_dir = Path(out_dir)
    records = []
    truths: dict[str, SynthGroundTruth] = {}
    for seq_index in range(num_sequences):
        patient_id = f"pat{seq_index % num_patients:02d}"
        sequence_id = f"seq{seq_index:03d}"
        rng = np.random.default_rng(
            np.random.SeedSequence([config.seed & (2**64 - 1), seq_index])
        )
        frames, truth = generate_sequence(config, rng)
        refs = []
        for i, frame in enumerate(frames):
            ref = f"frames/{patient_id}/{sequence_id}/frame_{i:05d}.pgm"
            save_frame(frame, out_dir / ref)
            refs.append(ref)
        records.append(
            SequenceRecord(
                patient_id=patient_id, sequence_id=sequence_id, frame_refs=tuple(refs)
            )
        )
        truths[sequence_id] = truth

    manifest = DatasetManifest(sequences=tuple(records))
    write_manifest(manifest, out_dir / "manifest.jsonl")
    _write_ground_truth(truths, out_dir / "ground_truth.json")
    return manifest, truths


def plant_redundancy_corpus(
    out_dir: str | Path,
    config: SynthConfig,
    redundancy_factor: float,
    num_sequences: int = 4,
    num_patients: int = 2,
) -> tuple[DatasetManifest, float]:
    """Corpus where each scene contributes redundancy_factor frames on
    average, so an ideal filter keeps a 1/redundancy_factor fraction.

    Scene lengths follow the Bresenham pattern
    counts[i] = floor((i+1) f) - floor(i f), which hits the average
    exactly over the whole sequence. Returns the manifest and the
    expected kept fraction.
    """
    if redundancy_factor < 1.0:
        raise ValueError(f"redundancy_factor must be >= 1, got {redundancy_factor}")
    counts = [
        math.floor((i + 1) * redundancy_factor) - math.floor(i * redundancy_factor)
        for i in range(config.num_scenes)
    ]
    cfg = replace(config, frames_per_scene=counts)
    manifest, _ = build_corpus(
        out_dir, cfg, num_sequences=num_sequences, num_patients=num_patients
    )
    return manifest, 1.0 / redundancy_factor


def generate_labeled_pairs(
    out_dir: str | Path,
    config: SynthConfig,
    num_refs: int = 50,
) -> Path:
    """Write a calibration pair set: for each of num_refs reference
    textures, one similar partner (same texture, fresh noise) and one
    dissimilar partner (independent texture). Returns the path of the
    pairs.csv file; frames live in pairs/ next to it.

    With a high noise_sigma relative to the texture contrast this set
    is noise dominated: full-resolution scores overlap between the
    classes while coarse scales separate them.
    """
    out_dir = Path(out_dir)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed & (2**64 - 1), 97]))
    rows = []
    for i in range(num_refs):
        texture = _texture(rng, config.frame_size, config.texture_grain)
        other = _texture(rng, config.frame_size, config.texture_grain)
        ref = Frame(pixels=_add_noise(texture, config.noise_sigma, rng))
        sim = Frame(pixels=_add_noise(texture, config.noise_sigma, rng))
        dis = Frame(pixels=_add_noise(other, config.noise_sigma, rng))
        ref_path = f"pairs/ref_{i:04d}.pgm"
        sim_path = f"pairs/sim_{i:04d}.pgm"
        dis_path = f"pairs/dis_{i:04d}.pgm"
        save_frame(ref, out_dir / ref_path)
        save_frame(sim, out_dir / sim_path)
        save_frame(dis, out_dir / dis_path)
        rows.append(f"{ref_path},{sim_path},similar")
        rows.append(f"{ref_path},{dis_path},dissimilar")
    pairs_path = out_dir / "pairs.csv"
    pairs_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return pairs_path


def _write_ground_truth(truths: dict[str, SynthGroundTruth], path: Path) -> None:
    payload = {
        sid: {
            "scene_start_indices": list(t.scene_start_indices),
            "scene_ids": list(t.scene_ids),
        }
        for sid, t in truths.items()
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_ground_truth(path: str | Path) -> dict[str, SynthGroundTruth]:
    """Read back a ground_truth.json sidecar."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return {
        sid: SynthGroundTruth(
            scene_start_indices=tuple(entry["scene_start_indices"]),
            scene_ids=tuple(entry["scene_ids"]),
        )
        for sid, entry in payload.items()
    }
