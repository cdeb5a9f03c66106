"""Command-line surface: calibrate, sweep-scales, filter, stats, split, synth.

Every option has a three-level source: command-line flag beats config
file beats built-in default, applied field-wise. The config file
(--config) is a flat JSON object; recognized keys:

    tau               float, pair decision threshold (default 0.411)
    scale_inverse     int >= 1, downscale factor 1/k (default 32)
    window            "global" | "uniform_7" | "gaussian_11_sigma_1_5"
    workers           int >= 1 (default: available parallelism)
    seed              int (default 0)
    val_fraction      float in (0, 1) (default 0.2)
    strategy          "target_fnr" | "target_fpr" | "youden"
    target            float, rate bound for the target_* strategies
    bins              int, histogram bin count
    mode              "manifest_only" | "copy" | "link"
    scales            list of ints, sweep candidates
    frame_size, num_scenes, frames_per_scene, noise_sigma,
    drift_step, texture_grain, num_sequences, num_patients,
    redundancy_factor, num_refs        synthetic-corpus knobs

frames_per_scene accepts an int, a "lo:hi" string (inclusive range
sampled per scene), or a per-scene list of ints.

Progress goes to stderr; stdout carries exactly one machine-readable
summary line per successful run. Commands refuse to write into a
non-empty output directory unless --force is given. Exit status is 0
only when every declared output was written.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from .calibration import (
    histogram,
    load_pairs,
    roc,
    score_pairs,
    select_threshold,
    sweep_scales,
    write_calibration_tables,
)
from .errors import FrameSiftError
from .filtering import (
    FilterConfig,
    filter_dataset,
    reduction_stats,
    write_filtered_output,
    write_report,
)
from .imaging import ScaleFactor, SsimParams
from .manifest import load_manifest, make_lopo_splits, write_split_plans
from .synth import (
    SynthConfig,
    build_corpus,
    generate_labeled_pairs,
    plant_redundancy_corpus,
)


class CliError(FrameSiftError):
    """Bad invocation or unusable inputs, reported without a traceback."""


_CONFIG_KEYS = frozenset(
    {
        "tau",
        "scale_inverse",
        "window",
        "workers",
        "seed",
        "val_fraction",
        "strategy",
        "target",
        "bins",
        "mode",
        "scales",
        "frame_size",
        "num_scenes",
        "frames_per_scene",
        "noise_sigma",
        "drift_step",
        "texture_grain",
        "num_sequences",
        "num_patients",
        "redundancy_factor",
        "num_refs",
    }
)


@dataclass(frozen=True)
class RunConfig:
    """Effective core knobs for one run after the field-wise merge."""

    tau: float = 0.411
    scale_inverse: int = 32
    window: str = "global"
    workers: int | None = None
    seed: int = 0

    def ssim_params(self) -> SsimParams:
        return SsimParams(window=self.window)

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            tau=self.tau,
            scale=ScaleFactor(self.scale_inverse),
            ssim=self.ssim_params(),
        )

    def effective_workers(self) -> int:
        if self.workers is not None:
            if self.workers < 1:
                raise CliError(f"workers must be >= 1, got {self.workers}")
            return self.workers
        return os.cpu_count() or 1


def _load_config_file(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise CliError(f"cannot read config file: {e}") from e
    except json.JSONDecodeError as e:
        raise CliError(f"config file {path}: {e}") from e
    if not isinstance(obj, dict):
        raise CliError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(obj) - _CONFIG_KEYS)
    if unknown:
        raise CliError(f"config file {path}: unknown keys {', '.join(unknown)}")
    return obj


def _resolve(args: argparse.Namespace, cfg: dict[str, Any], key: str, default: Any) -> Any:
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if key in cfg:
        return cfg[key]
    return default


def _run_config(args: argparse.Namespace, cfg: dict[str, Any]) -> RunConfig:
    return RunConfig(
        tau=_resolve(args, cfg, "tau", 0.411),
        scale_inverse=_resolve(args, cfg, "scale_inverse", 32),
        window=_resolve(args, cfg, "window", "global"),
        workers=_resolve(args, cfg, "workers", None),
        seed=_resolve(args, cfg, "seed", 0),
    )


def _prepare_out_dir(path_str: str, force: bool) -> Path:
    path = Path(path_str)
    if path.exists():
        if not path.is_dir():
            raise CliError(f"{path} exists and is not a directory")
        if any(path.iterdir()) and not force:
            raise CliError(
                f"output directory {path} is not empty; pass --force to write into it"
            )
    else:
        path.mkdir(parents=True)
    return path


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def _parse_scales(value: Any) -> list[int]:
    if isinstance(value, str):
        tokens = [tok.strip() for tok in value.split(",")]
        tokens = [tok for tok in tokens if tok]
        try:
            value = [int(tok) for tok in tokens]
        except ValueError as e:
            raise CliError(f"bad --scales value: {e}") from e
    if not isinstance(value, list) or not all(isinstance(v, int) for v in value):
        raise CliError("scales must be a comma-separated list of integers")
    if not value:
        raise CliError("no scales given")
    return value


def _parse_frames_per_scene(value: Any) -> int | tuple[int, int] | list[int]:
    if isinstance(value, int):
        return value
    if isinstance(value, list):
        if not all(isinstance(v, int) for v in value):
            raise CliError("frames_per_scene list must hold integers")
        return value
    if isinstance(value, str):
        text = value.strip()
        try:
            if ":" in text:
                lo, hi = text.split(":", 1)
                return (int(lo), int(hi))
            return int(text)
        except ValueError as e:
            raise CliError(f"bad frames_per_scene value {value!r}: {e}") from e
    raise CliError(f"bad frames_per_scene value {value!r}")


def _fmt(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_calibrate(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config)
    run = _run_config(args, cfg)
    strategy = _resolve(args, cfg, "strategy", "target_fnr")
    target = _resolve(args, cfg, "target", 0.1)
    bins = _resolve(args, cfg, "bins", 20)

    pairs_path = Path(args.pairs)
    pairs = load_pairs(pairs_path)
    out = _prepare_out_dir(args.out, args.force)

    _progress(
        f"scoring {len(pairs)} pairs at scale 1/{run.scale_inverse} "
        f"({run.effective_workers()} workers)"
    )
    scored = score_pairs(
        pairs,
        run.scale_inverse,
        params=run.ssim_params(),
        base_dir=pairs_path.parent,
        workers=run.effective_workers(),
    )
    hist = histogram(scored, bins=bins)
    curve = roc(scored)
    point = select_threshold(curve, strategy, None if strategy == "youden" else target)

    write_calibration_tables(hist, curve, out)
    summary = {
        "tau": point.tau,
        "fnr": point.fnr,
        "fpr": point.fpr,
        "auc": curve.auc,
        "strategy": strategy,
        "target": None if strategy == "youden" else target,
        "scale_inverse": run.scale_inverse,
        "window": run.window,
        "num_pairs": len(pairs),
    }
    (out / "operating_point.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )
    print(
        f"calibrate: tau={_fmt(point.tau)} fnr={_fmt(point.fnr)} "
        f"fpr={_fmt(point.fpr)} auc={_fmt(curve.auc)} strategy={strategy}"
    )
    return 0


def cmd_sweep_scales(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config)
    run = _run_config(args, cfg)
    scales = _parse_scales(_resolve(args, cfg, "scales", "1,2,4,8,16,32,64"))

    pairs_path = Path(args.pairs)
    pairs = load_pairs(pairs_path)
    out = _prepare_out_dir(args.out, args.force)

    _progress(f"sweeping {len(scales)} scales over {len(pairs)} pairs")
    result = sweep_scales(
        pairs,
        scales,
        params=run.ssim_params(),
        base_dir=pairs_path.parent,
        workers=run.effective_workers(),
    )

    with (out / "sweep.csv").open("w", encoding="utf-8", newline="") as fh:
        fh.write("scale_inverse,auc\n")
        for scale, auc in result.entries:
            fh.write(f"{scale.inverse},{auc!r}\n")
    best_auc = dict(result.entries)[result.best]
    print(f"sweep-scales: best_inverse={result.best.inverse} auc={_fmt(best_auc)}")
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config)
    run = _run_config(args, cfg)
    mode = _resolve(args, cfg, "mode", "manifest_only")

    manifest_path = Path(args.manifest)
    manifest = load_manifest(manifest_path)
    base_dir = manifest_path.parent
    out = _prepare_out_dir(args.out, args.force)

    _progress(
        f"filtering {len(manifest.sequences)} sequences "
        f"({manifest.total_frames()} frames, tau={run.tau}, "
        f"scale 1/{run.scale_inverse}, {run.effective_workers()} workers)"
    )
    report, filtered = filter_dataset(
        manifest, run.filter_config(), base_dir=base_dir, workers=run.effective_workers()
    )
    report = write_filtered_output(report, filtered, out, mode=mode, base_dir=base_dir)
    write_report(report, out)
    for warning in report.warnings:
        _progress(f"warning: {warning}")
    print(
        f"filter: frames_in={report.frames_in} frames_out={report.frames_out} "
        f"kept_fraction={_fmt(report.kept_fraction)} "
        f"reduction_factor={_fmt(report.reduction_factor)}"
    )
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    given_counts = args.frames_in is not None or args.frames_out is not None
    sources = sum([args.report is not None, given_counts, args.manifest is not None])
    if sources != 1:
        raise CliError(
            "give exactly one of --report, --frames-in/--frames-out, or --manifest"
        )

    if args.manifest is not None:
        manifest = load_manifest(args.manifest)
        print(
            f"stats: patients={len(manifest.patients())} "
            f"sequences={len(manifest.sequences)} frames={manifest.total_frames()}"
        )
        return 0

    if args.report is not None:
        try:
            payload = json.loads(Path(args.report).read_text(encoding="utf-8"))
            frames_in = int(payload["frames_in"])
            frames_out = int(payload["frames_out"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise CliError(f"cannot read report {args.report}: {e}") from e
    else:
        if args.frames_in is None or args.frames_out is None:
            raise CliError("--frames-in and --frames-out must be given together")
        frames_in, frames_out = args.frames_in, args.frames_out

    if frames_in < 0 or frames_out < 0 or frames_out > frames_in:
        raise CliError(
            f"need 0 <= frames_out <= frames_in, got {frames_out} of {frames_in}"
        )
    kept, reduction = reduction_stats(frames_in, frames_out)
    print(
        f"stats: frames_in={frames_in} frames_out={frames_out} "
        f"kept_fraction={_fmt(kept)} reduction_factor={_fmt(reduction)}"
    )
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config)
    run = _run_config(args, cfg)
    val_fraction = _resolve(args, cfg, "val_fraction", 0.2)

    manifest = load_manifest(args.manifest)
    plans = make_lopo_splits(manifest, seed=run.seed, val_fraction=val_fraction)
    out = _prepare_out_dir(args.out, args.force)
    paths = write_split_plans(plans, out)
    print(f"split: folds={len(paths)} out={out}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config)
    run = _run_config(args, cfg)
    synth_config = SynthConfig(
        frame_size=_resolve(args, cfg, "frame_size", 128),
        num_scenes=_resolve(args, cfg, "num_scenes", 5),
        frames_per_scene=_parse_frames_per_scene(
            _resolve(args, cfg, "frames_per_scene", 6)
        ),
        noise_sigma=_resolve(args, cfg, "noise_sigma", 8.0),
        drift_step=_resolve(args, cfg, "drift_step", 0),
        texture_grain=_resolve(args, cfg, "texture_grain", 32),
        seed=run.seed,
    )
    num_sequences = _resolve(args, cfg, "num_sequences", 4)
    num_patients = _resolve(args, cfg, "num_patients", 2)
    redundancy_factor = _resolve(args, cfg, "redundancy_factor", None)
    num_refs = _resolve(args, cfg, "num_refs", 50)

    out = _prepare_out_dir(args.out, args.force)
    if args.pairs:
        _progress(f"generating {num_refs} labeled reference pairs")
        pairs_path = generate_labeled_pairs(out, synth_config, num_refs=num_refs)
        print(f"synth: pairs={2 * num_refs} pairs_file={pairs_path}")
        return 0
    if redundancy_factor is not None:
        _progress(
            f"generating {num_sequences} sequences with planted redundancy "
            f"factor {redundancy_factor}"
        )
        manifest, expected = plant_redundancy_corpus(
            out,
            synth_config,
            redundancy_factor,
            num_sequences=num_sequences,
            num_patients=num_patients,
        )
        print(
            f"synth: sequences={len(manifest.sequences)} "
            f"frames={manifest.total_frames()} "
            f"expected_kept_fraction={_fmt(expected)} out={out}"
        )
        return 0
    _progress(f"generating {num_sequences} sequences")
    manifest, _ = build_corpus(
        out, synth_config, num_sequences=num_sequences, num_patients=num_patients
    )
    print(
        f"synth: sequences={len(manifest.sequences)} "
        f"frames={manifest.total_frames()} out={out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="framesift",
        description=(
            "Near-duplicate frame filtering for frame-sequence datasets: "
            "downscaled-SSIM key-frame chaining, threshold calibration, "
            "patient-aware splits, and synthetic test corpora."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, *, out: bool = True) -> None:
        p.add_argument("--config", help="JSON config file; flags override its values")
        if out:
            p.add_argument("--out", required=True, help="output directory")
            p.add_argument(
                "--force",
                action="store_true",
                help="write into a non-empty output directory",
            )

    p = sub.add_parser("calibrate", help="pick a threshold from labeled pairs")
    p.add_argument("--pairs", required=True, help="CSV of ref_path,cand_path,label")
    p.add_argument("--scale-inverse", type=int, help="downscale factor 1/k")
    p.add_argument("--window", help="SSIM statistics window")
    p.add_argument(
        "--strategy", choices=["target_fnr", "target_fpr", "youden"],
        help="operating-point rule",
    )
    p.add_argument("--target", type=float, help="rate bound for target_* strategies")
    p.add_argument("--bins", type=int, help="histogram bin count")
    p.add_argument("--workers", type=int, help="worker thread count")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sweep-scales", help="rank downscale factors by pair AUC")
    p.add_argument("--pairs", required=True, help="CSV of ref_path,cand_path,label")
    p.add_argument("--scales", help="comma-separated inverse factors, e.g. 1,2,4")
    p.add_argument("--window", help="SSIM statistics window")
    p.add_argument("--workers", type=int, help="worker thread count")
    common(p)
    p.set_defaults(func=cmd_sweep_scales)

    p = sub.add_parser("filter", help="drop near-duplicate frames from a dataset")
    p.add_argument("--manifest", required=True, help="dataset manifest (JSON lines)")
    p.add_argument("--tau", type=float, help="pair decision threshold")
    p.add_argument("--scale-inverse", type=int, help="downscale factor 1/k")
    p.add_argument("--window", help="SSIM statistics window")
    p.add_argument(
        "--mode", choices=["manifest_only", "copy", "link"],
        help="how to materialize kept frames",
    )
    p.add_argument("--workers", type=int, help="worker thread count")
    common(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("stats", help="dataset or reduction statistics")
    p.add_argument("--report", help="report.json produced by the filter command")
    p.add_argument("--frames-in", type=int, help="frame count before filtering")
    p.add_argument("--frames-out", type=int, help="frame count after filtering")
    p.add_argument("--manifest", help="dataset manifest to summarize")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="leave-one-patient-out fold plans")
    p.add_argument("--manifest", required=True, help="dataset manifest (JSON lines)")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--val-fraction", type=float, help="validation share of each pool")
    common(p)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synth", help="generate a synthetic corpus or pair set")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--frame-size", type=int, help="square frame edge length")
    p.add_argument("--num-scenes", type=int, help="scenes per sequence")
    p.add_argument(
        "--frames-per-scene", help="count, lo:hi range, or per-scene list via config"
    )
    p.add_argument("--noise-sigma", type=float, help="per-frame Gaussian noise")
    p.add_argument("--drift-step", type=int, help="per-frame translation in pixels")
    p.add_argument("--texture-grain", type=int, help="scene texture blur size")
    p.add_argument("--num-sequences", type=int, help="sequences in the corpus")
    p.add_argument("--num-patients", type=int, help="patients in the corpus")
    p.add_argument(
        "--redundancy-factor", type=float,
        help="plant scenes of this average length",
    )
    p.add_argument(
        "--pairs", action="store_true",
        help="emit a labeled calibration pair set instead of a corpus",
    )
    p.add_argument("--num-refs", type=int, help="reference count for --pairs")
    common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FrameSiftError, ValueError, OSError) as exc:
        print(f"framesift: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
