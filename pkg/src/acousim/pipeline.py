"""Dataset ingestion, preprocessing orchestration, alignment reports, k-fold.

Directory layout for a dataset: root/<class>/<image>.png with an optional
root/<class>/boxes.json mapping file names to [x_min, y_min, x_max, y_max]
object boxes. Real-world images are normally pre-cropped around the target
and carry no boxes; synthetic images with boxes get the same crop-and-zoom
treatment before comparison.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from . import __version__
from .features import Histogram, aggregate, intensity_histogram, lbp_histogram
from .image import (
    BoundingBox,
    DEFAULT_CROP_MARGIN,
    Image,
    TARGET_SIZE,
    gradient_magnitude,
    load_image,
    resize,
    subset_crop,
)
from .metrics import AlignmentResult, SmoothingPolicy, compare

MANIFEST_ROLES = ("real", "synthetic")
POOLING_MODES = ("mean", "pooled")
FEATURE_KINDS = ("intensity", "lbp")
METRIC_NAMES = ("kl", "js", "emd")

REPORT_JSON = "report.json"
REPORT_CSV = "report.csv"

_CSV_COLUMNS = (
    "dataset",
    "class",
    "kind",
    "kl",
    "js",
    "emd",
    "category",
    "kl_mean",
    "kl_std",
    "js_mean",
    "js_std",
    "emd_mean",
    "emd_std",
)


@dataclass(frozen=True)
class PipelineOptions:
    """Preprocessing and comparison knobs, echoed verbatim into reports."""

    apply_gradient: bool = True
    crop_margin: float = DEFAULT_CROP_MARGIN
    pooling: str = "mean"
    epsilon: float = 1e-10
    target_size: int = TARGET_SIZE

    def __post_init__(self):
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"unknown pooling mode {self.pooling!r}, expected one of {POOLING_MODES}")
        if self.crop_margin < 0:
            raise ValueError("crop margin must be >= 0")
        if self.target_size < 3:
            raise ValueError("target size must be >= 3")


@dataclass(frozen=True)
class DatasetManifest:
    """Classes and image paths for one dataset, plus optional object boxes."""

    name: str
    role: str
    classes: dict[str, tuple[Path, ...]]
    bboxes: dict[Path, BoundingBox] = field(default_factory=dict)

    def __post_init__(self):
        if self.role not in MANIFEST_ROLES:
            raise ValueError(f"unknown manifest role {self.role!r}, expected one of {MANIFEST_ROLES}")
        if not self.classes:
            raise ValueError(f"manifest {self.name!r} has no classes")
        seen: set[Path] = set()
        for label, paths in self.classes.items():
            if not paths:
                raise ValueError(f"class {label!r} in manifest {self.name!r} is empty")
            for p in paths:
                if p in seen:
                    raise ValueError(f"duplicate image path in manifest {self.name!r}: {p}")
                seen.add(p)
        for p in self.bboxes:
            if p not in seen:
                raise ValueError(f"bounding box for unknown image path: {p}")

    def class_labels(self) -> list[str]:
        return sorted(self.classes)


def _verify_decodable(path: Path) -> None:
    try:
        with PILImage.open(path) as im:
            im.verify()
    except Exception as exc:
        raise ValueError(f"undecodable image file {path}: {exc}") from exc


def ingest(root, role: str, name: str | None = None) -> DatasetManifest:
    """Scan a root/<class>/*.png tree into a manifest, sorted for determinism."""
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"dataset root {root} is not a directory")
    classes: dict[str, tuple[Path, ...]] = {}
    bboxes: dict[Path, BoundingBox] = {}
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        paths = sorted(class_dir.glob("*.png"))
        if not paths:
            raise ValueError(f"class directory {class_dir} contains no .png images")
        for p in paths:
            _verify_decodable(p)
        boxes_file = class_dir / "boxes.json"
        if boxes_file.is_file():
            entries = json.loads(boxes_file.read_text(encoding="utf-8"))
            for fname, corners in entries.items():
                target = class_dir / fname
                if target not in paths:
                    raise ValueError(f"{boxes_file} references missing image {fname!r}")
                x_min, y_min, x_max, y_max = (int(c) for c in corners)
                bbox = BoundingBox(x_min, y_min, x_max, y_max)
                with PILImage.open(target) as im:
                    w, h = im.size
                if x_max >= w or y_max >= h:
                    raise ValueError(f"bounding box {corners} exceeds image {target} ({w}x{h})")
                bboxes[target] = bbox
        classes[class_dir.name] = tuple(paths)
    if not classes:
        raise ValueError(f"dataset root {root} contains no class directories")
    return DatasetManifest(name=name or root.name, role=role, classes=classes, bboxes=bboxes)


def preprocess(path, bbox: BoundingBox | None, options: PipelineOptions) -> Image:
    """Grayscale, optional crop-and-zoom, square resize, optional gradient map."""
    img = load_image(path)
    if bbox is not None:
        img = subset_crop(img, bbox, options.crop_margin, options.target_size)
    else:
        img = resize(img, options.target_size, options.target_size)
    if options.apply_gradient:
        img = gradient_magnitude(img)
    return img


def _image_histogram(img: Image, kind: str) -> tuple[Histogram, int]:
    if kind == "intensity":
        return intensity_histogram(img), img.pixels.size
    if kind == "lbp":
        return lbp_histogram(img), (img.width - 2) * (img.height - 2)
    raise ValueError(f"unknown feature kind {kind!r}, expected one of {FEATURE_KINDS}")


def class_histograms(
    manifest: DatasetManifest, class_label: str, kind: str, options: PipelineOptions
) -> tuple[list[Histogram], list[int]]:
    """Per-image histograms (sorted path order) with their sample counts."""
    if class_label not in manifest.classes:
        raise ValueError(f"class {class_label!r} not present in manifest {manifest.name!r}")
    hists: list[Histogram] = []
    counts: list[int] = []
    for path in sorted(manifest.classes[class_label]):
        img = preprocess(path, manifest.bboxes.get(path), options)
        hist, n = _image_histogram(img, kind)
        hists.append(hist)
        counts.append(n)
    return hists, counts


def _pooled_aggregate(hists: list[Histogram], counts: list[int], options: PipelineOptions) -> Histogram:
    if options.pooling == "pooled":
        return aggregate(hists, weights=counts)
    return aggregate(hists)


def dataset_histogram(
    manifest: DatasetManifest, class_label: str, kind: str, options: PipelineOptions
) -> Histogram:
    hists, counts = class_histograms(manifest, class_label, kind, options)
    return _pooled_aggregate(hists, counts, options)


def dataset_alignment(
    real: DatasetManifest,
    synth: DatasetManifest,
    class_label: str,
    kind: str,
    options: PipelineOptions = PipelineOptions(),
) -> AlignmentResult:
    """Compare one class's real distribution against its synthetic one."""
    for manifest in (real, synth):
        if class_label not in manifest.classes:
            raise ValueError(f"class {class_label!r} missing from manifest {manifest.name!r}")
    real_hist = dataset_histogram(real, class_label, kind, options)
    synth_hist = dataset_histogram(synth, class_label, kind, options)
    return compare(real_hist, synth_hist, SmoothingPolicy(options.epsilon))


@dataclass(frozen=True)
class FoldStats:
    """Mean and population std (ddof 0) of one metric across folds."""

    mean: float
    std: float
    per_fold: tuple[float, ...]

    def __post_init__(self):
        values = np.asarray(self.per_fold, dtype=np.float64)
        if values.size == 0:
            raise ValueError("per_fold must be non-empty")
        if abs(self.mean - float(values.mean())) > 1e-12:
            raise ValueError("mean does not match per_fold values")
        if abs(self.std - float(values.std(ddof=0))) > 1e-12:
            raise ValueError("std does not match per_fold values")

    @classmethod
    def from_values(cls, values) -> "FoldStats":
        arr = np.asarray(values, dtype=np.float64)
        # a constant sample has zero deviation; np.std would leak the ulp
        # error of its non-representable mean
        std = float(arr.std(ddof=0)) if np.ptp(arr) > 0 else 0.0
        return cls(mean=float(arr.mean()), std=std, per_fold=tuple(float(v) for v in arr))


def _fold_indices(n: int, k: int, seed: int, class_index: int) -> list[np.ndarray]:
    order = np.random.default_rng([seed, class_index]).permutation(n)
    return np.array_split(order, k)


def stratified_kfold(
    real: DatasetManifest,
    synth: DatasetManifest,
    k: int = 5,
    seed: int = 0,
    options: PipelineOptions = PipelineOptions(),
    fold_synthetic: bool = False,
) -> dict[tuple[str, str, str], FoldStats]:
    """Per-class fold statistics keyed by (class, kind, metric).

    Real images of each class are shuffled with the seed and split into k
    near-equal folds; each fold's distribution is compared against the full
    synthetic distribution (or the matching synthetic fold when
    fold_synthetic is set).
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    shared = sorted(set(real.classes) & set(synth.classes))
    if not shared:
        raise ValueError(
            f"no shared classes between {real.name!r} ({real.class_labels()}) "
            f"and {synth.name!r} ({synth.class_labels()})"
        )
    smoothing = SmoothingPolicy(options.epsilon)
    results: dict[tuple[str, str, str], FoldStats] = {}
    for class_index, class_label in enumerate(shared):
        n_real = len(real.classes[class_label])
        if n_real < k:
            raise ValueError(
                f"class {class_label!r} has {n_real} real images, fewer than k={k}"
            )
        folds = _fold_indices(n_real, k, seed, class_index)
        synth_folds = (
            _fold_indices(len(synth.classes[class_label]), k, seed, class_index)
            if fold_synthetic
            else None
        )
        if synth_folds is not None and any(f.size == 0 for f in synth_folds):
            raise ValueError(
                f"class {class_label!r} has too few synthetic images for k={k} folds"
            )
        for kind in FEATURE_KINDS:
            real_hists, real_counts = class_histograms(real, class_label, kind, options)
            synth_hists, synth_counts = class_histograms(synth, class_label, kind, options)
            full_synth = _pooled_aggregate(synth_hists, synth_counts, options)
            per_metric: dict[str, list[float]] = {m: [] for m in METRIC_NAMES}
            for j, fold in enumerate(folds):
                fold_hist = _pooled_aggregate(
                    [real_hists[i] for i in fold], [real_counts[i] for i in fold], options
                )
                if synth_folds is None:
                    synth_hist = full_synth
                else:
                    synth_hist = _pooled_aggregate(
                        [synth_hists[i] for i in synth_folds[j]],
                        [synth_counts[i] for i in synth_folds[j]],
                        options,
                    )
                result = compare(fold_hist, synth_hist, smoothing)
                per_metric["kl"].append(result.kl)
                per_metric["js"].append(result.js)
                per_metric["emd"].append(result.emd)
            for metric, values in per_metric.items():
                results[(class_label, kind, metric)] = FoldStats.from_values(values)
    return results


@dataclass(frozen=True)
class ValidationReport:
    """Alignment rows plus optional fold statistics and the full config echo."""

    tool: str
    version: str
    created_utc: str
    config: dict
    datasets: dict
    alignment: list
    kfold: list

    def to_dict(self) -> dict:
        return {
            "tool": self.tool,
            "version": self.version,
            "created_utc": self.created_utc,
            "config": self.config,
            "datasets": self.datasets,
            "alignment": self.alignment,
            "kfold": self.kfold,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValidationReport":
        return cls(
            tool=data["tool"],
            version=data["version"],
            created_utc=data["created_utc"],
            config=data["config"],
            datasets=data["datasets"],
            alignment=data["alignment"],
            kfold=data["kfold"],
        )


def _timestamp() -> str:
    # SOURCE_DATE_EPOCH pins the timestamp for byte-reproducible reports
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    moment = int(epoch) if epoch is not None else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(moment))


def build_report(
    real: DatasetManifest,
    synth: DatasetManifest,
    options: PipelineOptions = PipelineOptions(),
    k: int | None = None,
    seed: int = 0,
    fold_synthetic: bool = False,
    timestamp: str | None = None,
) -> ValidationReport:
    """Run alignment (and optionally k-fold) for every shared class."""
    shared = sorted(set(real.classes) & set(synth.classes))
    if not shared:
        raise ValueError(
            f"no shared classes: {real.name!r} has {real.class_labels()}, "
            f"{synth.name!r} has {synth.class_labels()}"
        )
    alignment_rows = []
    for class_label in shared:
        for kind in FEATURE_KINDS:
            result = dataset_alignment(real, synth, class_label, kind, options)
            alignment_rows.append(
                {
                    "dataset": real.name,
                    "class": class_label,
                    "kind": kind,
                    **result.to_dict(),
                }
            )
    kfold_rows = []
    if k is not None:
        stats = stratified_kfold(real, synth, k=k, seed=seed, options=options, fold_synthetic=fold_synthetic)
        for (class_label, kind, metric), fs in sorted(stats.items()):
            kfold_rows.append(
                {
                    "dataset": real.name,
                    "class": class_label,
                    "kind": kind,
                    "metric": metric,
                    "mean": fs.mean,
                    "std": fs.std,
                    "per_fold": list(fs.per_fold),
                }
            )
    config_echo = {
        "epsilon": options.epsilon,
        "log_base": "e",
        "pooling": options.pooling,
        "gradient": options.apply_gradient,
        "crop_margin": options.crop_margin,
        "target_size": options.target_size,
    }
    if k is not None:
        config_echo["kfold"] = {"k": k, "seed": seed, "fold_synthetic": fold_synthetic}
    return ValidationReport(
        tool="acousim",
        version=__version__,
        created_utc=timestamp if timestamp is not None else _timestamp(),
        config=config_echo,
        datasets={"real": real.name, "synthetic": synth.name},
        alignment=alignment_rows,
        kfold=kfold_rows,
    )


def _fold_lookup(report: ValidationReport) -> dict[tuple[str, str, str], dict]:
    return {(row["class"], row["kind"], row["metric"]): row for row in report.kfold}


def write_report(report: ValidationReport, out_dir) -> tuple[Path, Path]:
    """Serialize a report as report.json plus a flat report.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / REPORT_JSON
    csv_path = out_dir / REPORT_CSV

    json_path.write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    folds = _fold_lookup(report)
    with csv_path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_COLUMNS)
        for row in report.alignment:
            key_base = (row["class"], row["kind"])
            fold_cells = []
            for metric in METRIC_NAMES:
                fold_row = folds.get((*key_base, metric))
                if fold_row is None:
                    fold_cells += ["", ""]
                else:
                    fold_cells += [repr(fold_row["mean"]), repr(fold_row["std"])]
            writer.writerow(
                [
                    row["dataset"],
                    row["class"],
                    row["kind"],
                    repr(row["kl"]),
                    repr(row["js"]),
                    repr(row["emd"]),
                    row["category"],
                    *fold_cells,
                ]
            )
    return json_path, csv_path


def read_report(path) -> ValidationReport:
    """Load a report written by write_report (directory or report.json path)."""
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_JSON
    return ValidationReport.from_dict(json.loads(path.read_text(encoding="utf-8")))
