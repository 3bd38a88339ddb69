"""Command-line entry point: generate, validate, kfold, hist.

All stochastic behavior flows through explicit seeds on the command line,
so every subcommand is reproducible: the same flags always produce
byte-identical outputs. The ACOUSIM_THREADS environment variable caps the
worker count used for batch generation; outputs never depend on it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, rng
from .features import aggregate, intensity_histogram, lbp_histogram, write_histogram_csv
from .image import Image, load_image, write_png
from .noise import NoiseConfig, apply_noise
from .pipeline import (
    PipelineOptions,
    build_report,
    dataset_histogram,
    ingest,
    write_report,
)
from .scene import SceneConfig, render

THREADS_ENV = "ACOUSIM_THREADS"

# hash-stream tags for the per-image draws of randomized config fields
_DRAW_ALTITUDE = 0x11
_DRAW_YAW = 0x12
_DRAW_PITCH = 0x13
_DRAW_HEADING = 0x14


def _worker_count(task_count: int) -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is not None:
        try:
            cap = int(raw)
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
        if cap < 1:
            raise ValueError(f"{THREADS_ENV} must be >= 1, got {cap}")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, task_count))


def _draw_in_range(value, seed: int, tag: int, field_name: str) -> float:
    """Resolve a scalar-or-[lo, hi] config field for one image seed."""
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        lo, hi = float(value[0]), float(value[1])
        if hi < lo:
            raise ValueError(f"{field_name}: range upper bound {hi} below lower bound {lo}")
        return lo + (hi - lo) * float(rng.uniform(seed, tag))
    raise ValueError(f"{field_name}: expected a number or [low, high] range, got {value!r}")


def _resolve_scene(template: dict, seed: int) -> tuple[SceneConfig, NoiseConfig]:
    """Instantiate one image's scene and noise configs from a generate template."""
    data = dict(template)
    noise_data = dict(data.pop("noise", {}))
    noise_data.setdefault("seed", seed)
    data["seed"] = seed
    data["altitude_m"] = _draw_in_range(
        data.get("altitude_m", 15.0), seed, _DRAW_ALTITUDE, "altitude_m"
    )
    data["illum_yaw_deg"] = _draw_in_range(
        data.get("illum_yaw_deg", 0.0), seed, _DRAW_YAW, "illum_yaw_deg"
    )
    data["illum_pitch_deg"] = _draw_in_range(
        data.get("illum_pitch_deg", 45.0), seed, _DRAW_PITCH, "illum_pitch_deg"
    )
    obj = dict(data.get("object_params", {}))
    if "heading_deg" in obj:
        obj["heading_deg"] = _draw_in_range(obj["heading_deg"], seed, _DRAW_HEADING, "heading_deg")
    data["object_params"] = obj
    return SceneConfig.from_dict(data), NoiseConfig.from_dict(noise_data)


def _generate_one(template: dict, seed: int, index: int, out_dir: Path) -> None:
    scene_cfg, noise_cfg = _resolve_scene(template, seed)
    result = render(scene_cfg)
    img = result.image
    if noise_cfg.gaussian_sigma > 0 or noise_cfg.speckle_sigma > 0:
        img = apply_noise(img, noise_cfg)
    stem = f"{index:06d}"
    write_png(img, out_dir / f"{stem}.png")
    sidecar = {
        "config": {**scene_cfg.to_dict(), "noise": noise_cfg.to_dict()},
        "object_bbox": result.object_bbox.to_list(),
        "meters_per_pixel": result.meters_per_pixel,
        "shadow_pixel_count": int(result.shadow_mask.sum()),
    }
    (out_dir / f"{stem}.json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def cmd_generate(args) -> int:
    try:
        template = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(template, dict):
            raise ValueError("scene config must be a JSON object")
        # validate the schema once before spending time on rendering
        _resolve_scene(template, args.seed)
    except (OSError, ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: invalid scene config: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    workers = _worker_count(args.count)
    tasks = [(template, args.seed + i, i, out_dir) for i in range(args.count)]
    if workers == 1:
        for task in tasks:
            _generate_one(*task)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for future in [pool.submit(_generate_one, *task) for task in tasks]:
                future.result()
    print(f"wrote {args.count} image(s) to {out_dir}")
    return 0


def _pipeline_options(args) -> PipelineOptions:
    return PipelineOptions(
        apply_gradient=not args.no_gradient,
        crop_margin=args.margin,
        pooling=args.pooling,
        epsilon=args.epsilon,
    )


def _run_validation(args, k: int | None) -> int:
    options = _pipeline_options(args)
    real = ingest(args.real_dir, "real")
    synth = ingest(args.synth_dir, "synthetic")
    report = build_report(
        real,
        synth,
        options=options,
        k=k,
        seed=args.seed,
        fold_synthetic=getattr(args, "fold_synthetic", False),
    )
    json_path, csv_path = write_report(report, args.out)
    if getattr(args, "export_hists", False):
        for row in report.alignment:
            hist = dataset_histogram(real, row["class"], row["kind"], options)
            write_histogram_csv(hist, Path(args.out) / f"hist_real_{row['class']}_{row['kind']}.csv")
            hist = dataset_histogram(synth, row["class"], row["kind"], options)
            write_histogram_csv(hist, Path(args.out) / f"hist_synthetic_{row['class']}_{row['kind']}.csv")
    for row in report.alignment:
        print(
            f"{row['dataset']}/{row['class']} [{row['kind']}] "
            f"kl={row['kl']:.4f} js={row['js']:.4f} emd={row['emd']:.5f} -> {row['category']}"
        )
    print(f"report written to {json_path} and {csv_path}")
    return 0


def cmd_validate(args) -> int:
    return _run_validation(args, k=None)


def cmd_kfold(args) -> int:
    return _run_validation(args, k=args.k)


def cmd_noise(args) -> int:
    cfg = NoiseConfig(
        gaussian_sigma=args.gaussian_sigma,
        speckle_sigma=args.speckle_sigma,
        seed=args.seed,
        speckle_model=args.speckle_model,
    )
    source = Path(args.input)
    out = Path(args.out)
    if source.is_dir():
        paths = sorted(source.rglob("*.png"))
        if not paths:
            raise ValueError(f"no .png images under {source}")
        out.mkdir(parents=True, exist_ok=True)
        for i, path in enumerate(paths):
            per_image = NoiseConfig(
                gaussian_sigma=cfg.gaussian_sigma,
                speckle_sigma=cfg.speckle_sigma,
                seed=cfg.seed + i,
                speckle_model=cfg.speckle_model,
            )
            write_png(apply_noise(load_image(path), per_image), out / path.name)
        print(f"wrote {len(paths)} degraded image(s) to {out}")
    elif source.is_file():
        out.parent.mkdir(parents=True, exist_ok=True)
        write_png(apply_noise(load_image(source), cfg), out)
        print(f"degraded image written to {out}")
    else:
        raise ValueError(f"input {source} does not exist")
    return 0


def cmd_hist(args) -> int:
    source = Path(args.input)
    make = intensity_histogram if args.kind == "intensity" else lbp_histogram
    if source.is_dir():
        paths = sorted(source.rglob("*.png"))
        if not paths:
            raise ValueError(f"no .png images under {source}")
        hist = aggregate([make(load_image(p)) for p in paths])
    elif source.is_file():
        hist = make(load_image(source))
    else:
        raise ValueError(f"input {source} does not exist")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_histogram_csv(hist, out)
    print(f"histogram written to {out}")
    return 0


def _add_validation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("real_dir", help="directory tree of real images (root/<class>/*.png)")
    parser.add_argument("synth_dir", help="directory tree of synthetic images")
    parser.add_argument("--out", required=True, help="output directory for report.json/report.csv")
    parser.add_argument("--epsilon", type=float, default=1e-10, help="zero-bin smoothing mass (default 1e-10)")
    parser.add_argument("--no-gradient", action="store_true", help="skip the gradient-magnitude mapping")
    parser.add_argument("--pooling", choices=["mean", "pooled"], default="mean",
                        help="dataset histogram pooling: mean of per-image histograms or pooled pixel counts")
    parser.add_argument("--margin", type=float, default=0.25, help="crop margin around object boxes (default 0.25)")
    parser.add_argument("--export-hists", action="store_true", dest="export_hists",
                        help="also write aggregated per-comparison histogram CSVs")
    parser.add_argument("--seed", type=int, default=0, help="fold shuffling seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="acousim",
        description="Sonar-style image generation and statistical sim-to-real validation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="render a batch of synthetic images")
    p_gen.add_argument("--config", required=True, help="scene config JSON (fields may be [low, high] ranges)")
    p_gen.add_argument("--out", required=True, help="output directory for PNGs and JSON sidecars")
    p_gen.add_argument("--count", type=int, default=1, help="number of images (default 1)")
    p_gen.add_argument("--seed", type=int, default=0, help="base seed; image i uses seed+i")
    p_gen.set_defaults(func=cmd_generate)

    p_val = sub.add_parser("validate", help="compare a real and a synthetic dataset")
    _add_validation_flags(p_val)
    p_val.set_defaults(func=cmd_validate)

    p_kf = sub.add_parser("kfold", help="validate plus stratified k-fold robustness statistics")
    _add_validation_flags(p_kf)
    p_kf.add_argument("--k", type=int, default=5, help="number of folds (default 5)")
    p_kf.add_argument("--fold-synthetic", action="store_true", dest="fold_synthetic",
                      help="also fold the synthetic side instead of using its full distribution")
    p_kf.set_defaults(func=cmd_kfold)

    p_noise = sub.add_parser("noise", help="apply sensor noise to existing PNG images")
    p_noise.add_argument("input", help="PNG file or directory of PNGs")
    p_noise.add_argument("--out", required=True, help="output file (or directory for directory input)")
    p_noise.add_argument("--gaussian-sigma", type=float, default=8.0, dest="gaussian_sigma",
                         help="additive noise sigma in intensity units (default 8)")
    p_noise.add_argument("--speckle-sigma", type=float, default=0.15, dest="speckle_sigma",
                         help="multiplicative speckle spread (default 0.15)")
    p_noise.add_argument("--speckle-model", choices=["gaussian", "exponential"], default="gaussian",
                         dest="speckle_model")
    p_noise.add_argument("--seed", type=int, default=0,
                         help="noise seed; directory inputs use seed+i per sorted image")
    p_noise.set_defaults(func=cmd_noise)

    p_hist = sub.add_parser("hist", help="export an intensity or LBP histogram as CSV")
    p_hist.add_argument("input", help="image file or directory of images")
    p_hist.add_argument("--kind", choices=["intensity", "lbp"], required=True)
    p_hist.add_argument("--out", required=True, help="output CSV path")
    p_hist.set_defaults(func=cmd_hist)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
