"""Threshold calibration from labeled frame pairs.

Workflow: hand-labeled (reference, candidate, similar|dissimilar)
pairs are scored with the downscaled-SSIM feature, the two score
distributions are summarized as a histogram and an ROC curve, and an
operating threshold is picked from the curve. A scale sweep runs the
same scoring across several downscale factors and reports which one
separates the classes best.

Convention: the positive class is "dissimilar" and the decision rule
is "novel iff score < tau". A false negative is therefore a genuinely
new frame discarded as a duplicate (content loss), and a false
positive is a redundant frame kept (wasted compute). AUC is the
probability that a random dissimilar pair scores below a random
similar pair, with ties counted one half.
"""

from __future__ import annotations

import csv
from bisect import bisect_left
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, NamedTuple, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import CalibrationError, DimensionMismatchError, FrameSiftError
from .frames import Frame, load_frame
from .imaging import ScaleFactor, SsimParams, downscale, ssim

LABELS = ("similar", "dissimilar")

Strategy = Literal["target_fnr", "target_fpr", "youden"]


@dataclass(frozen=True)
class LabeledPair:
    """A calibration pair: two frame locators and a ground-truth label.

    line records where in the pairs file the pair came from, so later
    errors can point back at the source; it does not affect equality.
    """

    ref_frame: str
    cand_frame: str
    label: str
    line: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}, got {self.label!r}")


class RocPoint(NamedTuple):
    threshold: float
    fnr: float
    fpr: float


@dataclass(frozen=True)
class RocCurve:
    """ROC points ordered by ascending threshold, plus the rank AUC."""

    points: tuple[RocPoint, ...]
    auc: float


@dataclass(frozen=True)
class OperatingPoint:
    tau: float
    fnr: float
    fpr: float
    strategy: Strategy


@dataclass(frozen=True)
class HistogramResult:
    """Per-class counts over shared equal-width bins."""

    bin_edges: tuple[float, ...]
    similar_counts: tuple[int, ...]
    dissimilar_counts: tuple[int, ...]


def load_pairs(path: str | Path) -> list[LabeledPair]:
    """Read a pairs file: CSV lines `ref_path,cand_path,label`.

    Blank lines and lines starting with '#' are skipped. Malformed
    lines raise CalibrationError naming the line number.
    """
    pairs = []
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 3:
                raise CalibrationError(
                    f"pairs file line {lineno}: expected 3 fields, got {len(row)}"
                )
            ref, cand, label = (f.strip() for f in row)
            try:
                pairs.append(
                    LabeledPair(ref_frame=ref, cand_frame=cand, label=label, line=lineno)
                )
            except ValueError as e:
                raise CalibrationError(f"pairs file line {lineno}: {e}") from e
    return pairs


def _pair_name(index: int, pair: LabeledPair) -> str:
    if pair.line is not None:
        return f"pair {index} (pairs file line {pair.line})"
    return f"pair {index}"


def score_pairs(
    pairs: Sequence[LabeledPair],
    scale: ScaleFactor | int,
    params: SsimParams = SsimParams(),
    base_dir: str | Path | None = None,
    workers: int = 1,
) -> list[tuple[float, str]]:
    """Pair score per labeled pair, order preserved.

    Raises CalibrationError naming the pair index when a frame cannot
    be loaded or the two frames disagree in size.
    """
    if not pairs:
        raise CalibrationError("no pairs to score")

    def run_one(item: tuple[int, LabeledPair]) -> tuple[float, str]:
        index, pair = item
        try:
            a = load_frame(pair.ref_frame, base_dir)
            b = load_frame(pair.cand_frame, base_dir)
            return _score_frames(a, b, scale, params), pair.label
        except (FrameSiftError, OSError) as e:
            raise CalibrationError(f"{_pair_name(index, pair)}: {e}") from e

    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_one, enumerate(pairs)))
    return [run_one(item) for item in enumerate(pairs)]


def _score_frames(
    a: Frame, b: Frame, scale: ScaleFactor | int, params: SsimParams
) -> float:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"frame dimensions differ: {a.shape} vs {b.shape}")
    return ssim(downscale(a, scale), downscale(b, scale), params)


def histogram(scores: Sequence[tuple[float, str]], bins: int = 20) -> HistogramResult:
    """Bin the two score distributions over a shared equal-width grid
    spanning [min score, max score]."""
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    if not scores:
        raise CalibrationError("no scores to bin")
    values = np.array([s for s, _ in scores], dtype=np.float64)
    edges = np.histogram_bin_edges(values, bins=bins, range=(values.min(), values.max()))
    similar = np.array([s for s, lab in scores if lab == "similar"])
    dissimilar = np.array([s for s, lab in scores if lab == "dissimilar"])
    sim_counts, _ = np.histogram(similar, bins=edges)
    dis_counts, _ = np.histogram(dissimilar, bins=edges)
    return HistogramResult(
        bin_edges=tuple(float(e) for e in edges),
        similar_counts=tuple(int(c) for c in sim_counts),
        dissimilar_counts=tuple(int(c) for c in dis_counts),
    )


def roc(scores: Sequence[tuple[float, str]]) -> RocCurve:
    """ROC curve over all distinguishable thresholds.

    Candidate thresholds are the midpoints between consecutive
    distinct scores plus one sentinel below the minimum and one above
    the maximum. At each threshold, fnr is the fraction of dissimilar
    pairs scoring >= tau (missed novelty) and fpr the fraction of
    similar pairs scoring < tau (false novelty). The AUC is the
    Mann-Whitney rank statistic with ties counted one half.
    """
    sim = sorted(s for s, lab in scores if lab == "similar")
    dis = sorted(s for s, lab in scores if lab == "dissimilar")
    if not sim or not dis:
        raise CalibrationError(
            "ROC needs both similar and dissimilar pairs "
            f"(got {len(sim)} similar, {len(dis)} dissimilar)"
        )

    distinct = sorted({s for s, _ in scores})
    thresholds = [distinct[0] - 1.0]
    thresholds += [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]
    thresholds.append(distinct[-1] + 1.0)

    points = []
    for tau in thresholds:
        fnr = (len(dis) - bisect_left(dis, tau)) / len(dis)
        fpr = bisect_left(sim, tau) / len(sim)
        points.append(RocPoint(threshold=tau, fnr=fnr, fpr=fpr))
    return RocCurve(points=tuple(points), auc=_rank_auc(sim, dis))


def _rank_auc(sim: Sequence[float], dis: Sequence[float]) -> float:
    """P(dissimilar score < similar score), ties at 1/2, via average
    ranks (Mann-Whitney U)."""
    ranks = rankdata(np.concatenate([np.asarray(dis), np.asarray(sim)]))
    rank_sum_sim = float(ranks[len(dis):].sum())
    u = rank_sum_sim - len(sim) * (len(sim) + 1) / 2.0
    return u / (len(sim) * len(dis))


def select_threshold(
    curve: RocCurve, strategy: Strategy, target: float | None = None
) -> OperatingPoint:
    """Pick an operating point from the curve.

    target_fnr: among thresholds with fnr <= target, minimize fpr,
    then fnr, then the threshold itself (so a separable curve yields
    fnr=0, fpr=0 rather than a point sitting needlessly at the
    target). target_fpr is symmetric. youden: maximize 1 - fnr - fpr,
    tie toward the smallest threshold. Raises CalibrationError
    reporting the closest achievable rate when no threshold satisfies
    the target.
    """
    if strategy not in ("target_fnr", "target_fpr", "youden"):
        raise ValueError(f"unknown strategy {strategy!r}")
    points = curve.points
    if strategy == "youden":
        best = min(points, key=lambda p: (p.fnr + p.fpr, p.threshold))
    else:
        if target is None:
            raise ValueError(f"strategy {strategy} requires a target rate")
        rate = (lambda p: p.fnr) if strategy == "target_fnr" else (lambda p: p.fpr)
        other = (lambda p: p.fpr) if strategy == "target_fnr" else (lambda p: p.fnr)
        feasible = [p for p in points if rate(p) <= target]
        if not feasible:
            closest = min(rate(p) for p in points)
            raise CalibrationError(
                f"no threshold reaches {strategy} <= {target}; "
                f"closest achievable rate is {closest}"
            )
        best = min(feasible, key=lambda p: (other(p), rate(p), p.threshold))
    return OperatingPoint(
        tau=best.threshold, fnr=best.fnr, fpr=best.fpr, strategy=strategy
    )


@dataclass(frozen=True)
class ScaleSweepResult:
    """AUC per candidate scale and the winner (ties go to the larger
    inverse, i.e. the cheaper scale)."""

    entries: tuple[tuple[ScaleFactor, float], ...]
    best: ScaleFactor


def sweep_scales(
    pairs: Sequence[LabeledPair],
    scales: Sequence[ScaleFactor | int],
    params: SsimParams = SsimParams(),
    base_dir: str | Path | None = None,
    workers: int = 1,
) -> ScaleSweepResult:
    """Score the pair set at each scale and rank scales by AUC.

    Frames are loaded once and re-downscaled per scale. Requires at
    least one scale and both labels present.
    """
    if not scales:
        raise CalibrationError("no scales to sweep")
    normalized = [s if isinstance(s, ScaleFactor) else ScaleFactor(s) for s in scales]

    loaded: list[tuple[Frame, Frame, str]] = []
    for index, pair in enumerate(pairs):
        try:
            a = load_frame(pair.ref_frame, base_dir)
            b = load_frame(pair.cand_frame, base_dir)
        except (FrameSiftError, OSError) as e:
            raise CalibrationError(f"{_pair_name(index, pair)}: {e}") from e
        loaded.append((a, b, pair.label))

    entries = []
    for scale in normalized:

        def run_one(item: tuple[Frame, Frame, str]) -> tuple[float, str]:
            a, b, label = item
            return _score_frames(a, b, scale, params), label

        if workers > 1 and len(loaded) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                scored = list(pool.map(run_one, loaded))
        else:
            scored = [run_one(item) for item in loaded]
        entries.append((scale, roc(scored).auc))
    best = max(entries, key=lambda e: (e[1], e[0].inverse))[0]
    return ScaleSweepResult(entries=tuple(entries), best=best)


def write_calibration_tables(
    hist: HistogramResult, curve: RocCurve, out_dir: str | Path
) -> None:
    """Write histogram.csv and roc.csv (plain tables for external plotting)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "histogram.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_lo", "bin_hi", "similar_count", "dissimilar_count"])
        for i in range(len(hist.similar_counts)):
            writer.writerow(
                [
                    repr(hist.bin_edges[i]),
                    repr(hist.bin_edges[i + 1]),
                    hist.similar_counts[i],
                    hist.dissimilar_counts[i],
                ]
            )
    with (out_dir / "roc.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fnr", "fpr"])
        for p in curve.points:
            writer.writerow([repr(p.threshold), repr(p.fnr), repr(p.fpr)])
