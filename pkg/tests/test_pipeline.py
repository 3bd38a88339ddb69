"""Dataset ingestion, alignment, stratified k-fold, and report round-trips."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from acousim.image import BoundingBox, Image, gradient_magnitude, load_image, subset_crop, write_png
from acousim.pipeline import (
    DatasetManifest,
    FoldStats,
    PipelineOptions,
    _fold_indices,
    build_report,
    dataset_alignment,
    ingest,
    preprocess,
    read_report,
    stratified_kfold,
    write_report,
)

NO_GRADIENT = PipelineOptions(apply_gradient=False)


def write_class(root: Path, label: str, arrays, boxes=None) -> list[Path]:
    class_dir = root / label
    class_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, arr in enumerate(arrays):
        path = class_dir / f"img_{i:03d}.png"
        write_png(Image(np.asarray(arr, dtype=np.uint8)), path)
        paths.append(path)
    if boxes is not None:
        (class_dir / "boxes.json").write_text(json.dumps(boxes), encoding="utf-8")
    return paths


def textured(seed: int, side=40):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(side, side), dtype=np.uint8)


@pytest.fixture
def flat_dataset(tmp_path):
    """Two classes, three images each, no boxes."""
    root = tmp_path / "flat"
    write_class(root, "plane", [textured(s) for s in (1, 2, 3)])
    write_class(root, "ship", [textured(s) for s in (4, 5, 6)])
    return root


class TestIngest:
    def test_scans_classes_and_paths(self, flat_dataset):
        manifest = ingest(flat_dataset, "real")
        assert manifest.name == "flat"
        assert manifest.role == "real"
        assert manifest.class_labels() == ["plane", "ship"]
        assert sum(len(v) for v in manifest.classes.values()) == 6
        assert manifest.bboxes == {}

    def test_paths_sorted_lexicographically(self, flat_dataset):
        manifest = ingest(flat_dataset, "real")
        for paths in manifest.classes.values():
            assert list(paths) == sorted(paths)

    def test_boxes_json_parsed_and_validated(self, tmp_path):
        root = tmp_path / "boxed"
        write_class(
            root,
            "ship",
            [textured(1), textured(2)],
            boxes={"img_000.png": [5, 5, 20, 30]},
        )
        manifest = ingest(root, "synthetic")
        target = root / "ship" / "img_000.png"
        assert manifest.bboxes[target] == BoundingBox(5, 5, 20, 30)
        assert (root / "ship" / "img_001.png") not in manifest.bboxes

    def test_box_exceeding_image_rejected(self, tmp_path):
        root = tmp_path / "badbox"
        write_class(root, "ship", [textured(1)], boxes={"img_000.png": [0, 0, 100, 100]})
        with pytest.raises(ValueError, match="exceeds"):
            ingest(root, "synthetic")

    def test_empty_class_rejected(self, tmp_path):
        root = tmp_path / "empty"
        (root / "ship").mkdir(parents=True)
        with pytest.raises(ValueError, match="no .png"):
            ingest(root, "real")

    def test_undecodable_file_rejected_with_path(self, tmp_path):
        root = tmp_path / "broken"
        write_class(root, "ship", [textured(1)])
        bad = root / "ship" / "bad.png"
        bad.write_bytes(b"not a png at all")
        with pytest.raises(ValueError, match="bad.png"):
            ingest(root, "real")

    def test_duplicate_paths_rejected(self, tmp_path):
        path = tmp_path / "x.png"
        write_png(Image(textured(1)), path)
        with pytest.raises(ValueError, match="duplicate"):
            DatasetManifest(
                name="dup",
                role="real",
                classes={"a": (path,), "b": (path,)},
            )

    def test_invalid_role_rejected(self, tmp_path):
        path = tmp_path / "x.png"
        write_png(Image(textured(1)), path)
        with pytest.raises(ValueError, match="role"):
            DatasetManifest(name="m", role="simulated", classes={"a": (path,)})


class TestPreprocess:
    def test_resizes_and_maps_gradient(self, tmp_path):
        path = tmp_path / "img.png"
        write_png(Image(textured(9, side=77)), path)
        out = preprocess(path, None, PipelineOptions())
        assert (out.width, out.height) == (256, 256)
        plain = preprocess(path, None, NO_GRADIENT)
        assert out == gradient_magnitude(plain)

    def test_bbox_routes_through_subset_crop(self, tmp_path):
        path = tmp_path / "img.png"
        write_png(Image(textured(10, side=90)), path)
        bbox = BoundingBox(10, 20, 40, 50)
        out = preprocess(path, bbox, NO_GRADIENT)
        assert out == subset_crop(load_image(path), bbox, 0.25, 256)


class TestDatasetAlignment:
    def test_self_comparison_is_high_and_tiny(self, flat_dataset):
        real = ingest(flat_dataset, "real")
        synth = ingest(flat_dataset, "synthetic")
        for kind in ("intensity", "lbp"):
            result = dataset_alignment(real, synth, "ship", kind)
            assert result.category == "High"
            assert result.kl < 1e-6
            assert result.js < 1e-6
            assert result.emd < 1e-6

    def test_disjoint_intensity_extremes(self, tmp_path):
        dark_root = tmp_path / "dark"
        bright_root = tmp_path / "bright"
        write_class(dark_root, "ship", [np.zeros((32, 32))] * 2)
        write_class(bright_root, "ship", [np.full((32, 32), 255)] * 2)
        real = ingest(dark_root, "real")
        synth = ingest(bright_root, "synthetic")
        result = dataset_alignment(real, synth, "ship", "intensity", NO_GRADIENT)
        assert result.emd == 1.0
        assert result.js == pytest.approx(math.log(2.0), abs=1e-6)
        assert result.category == "Low"

    def test_missing_class_rejected(self, flat_dataset, tmp_path):
        other_root = tmp_path / "other"
        write_class(other_root, "plane", [textured(7)])
        real = ingest(flat_dataset, "real")
        synth = ingest(other_root, "synthetic")
        with pytest.raises(ValueError, match="'ship' missing"):
            dataset_alignment(real, synth, "ship", "intensity")

    def test_invariant_to_manifest_ordering(self, flat_dataset):
        manifest = ingest(flat_dataset, "real")
        reversed_classes = {
            label: tuple(reversed(paths)) for label, paths in manifest.classes.items()
        }
        shuffled = DatasetManifest(
            name=manifest.name, role="synthetic", classes=reversed_classes
        )
        synth = ingest(flat_dataset, "synthetic")
        a = dataset_alignment(manifest, synth, "ship", "intensity")
        b = dataset_alignment(manifest, shuffled, "ship", "intensity")
        assert (a.kl, a.js, a.emd) == (b.kl, b.js, b.emd)

    def test_pooled_mode_accepted_and_equal_after_resize(self, tmp_path):
        # preprocessing normalizes every image to the same resolution, so
        # pixel-count pooling and the per-image mean agree; the mode must
        # still be selectable and produce a valid result
        root_a = tmp_path / "a"
        root_b = tmp_path / "b"
        write_class(root_a, "c", [np.zeros((10, 10)), np.full((40, 40), 255)])
        write_class(root_b, "c", [np.zeros((20, 20)), np.full((20, 20), 255)])
        real = ingest(root_a, "real")
        synth = ingest(root_b, "synthetic")
        mean_result = dataset_alignment(real, synth, "c", "intensity", NO_GRADIENT)
        pooled_result = dataset_alignment(
            real, synth, "c", "intensity", PipelineOptions(apply_gradient=False, pooling="pooled")
        )
        assert pooled_result.emd == pytest.approx(mean_result.emd, abs=1e-12)
        assert pooled_result.kl == pytest.approx(mean_result.kl, abs=1e-12)


class TestStratifiedKFold:
    def make_pair(self, tmp_path, n=10, identical=False):
        root_real = tmp_path / "real"
        root_synth = tmp_path / "synth"
        if identical:
            arrays = [textured(42)] * n
        else:
            arrays = [textured(100 + i) for i in range(n)]
        write_class(root_real, "ship", arrays)
        write_class(root_synth, "ship", [textured(500 + i) for i in range(n)])
        return ingest(root_real, "real"), ingest(root_synth, "synthetic")

    def test_fold_sizes_near_equal(self):
        folds = _fold_indices(10, 5, seed=0, class_index=0)
        assert [len(f) for f in folds] == [2, 2, 2, 2, 2]
        folds = _fold_indices(11, 5, seed=0, class_index=0)
        assert sorted(len(f) for f in folds) == [2, 2, 2, 2, 3]
        assert sorted(np.concatenate(folds)) == list(range(11))

    def test_mean_std_definitions(self, tmp_path):
        real, synth = self.make_pair(tmp_path)
        stats = stratified_kfold(real, synth, k=5, seed=1)
        assert set(k[1] for k in stats) == {"intensity", "lbp"}
        for fs in stats.values():
            values = np.array(fs.per_fold)
            assert len(values) == 5
            assert fs.mean == pytest.approx(values.mean(), abs=1e-12)
            assert fs.std == pytest.approx(values.std(ddof=0), abs=1e-12)

    def test_identical_images_give_zero_std(self, tmp_path):
        real, synth = self.make_pair(tmp_path, n=5, identical=True)
        stats = stratified_kfold(real, synth, k=5, seed=3)
        for fs in stats.values():
            assert fs.std == 0.0

    def test_bit_reproducible_for_fixed_seed(self, tmp_path):
        real, synth = self.make_pair(tmp_path)
        a = stratified_kfold(real, synth, k=5, seed=7)
        b = stratified_kfold(real, synth, k=5, seed=7)
        assert a == b

    def test_seed_changes_folds(self, tmp_path):
        real, synth = self.make_pair(tmp_path)
        a = stratified_kfold(real, synth, k=5, seed=1)
        b = stratified_kfold(real, synth, k=5, seed=2)
        assert any(
            a[key].per_fold != b[key].per_fold for key in a
        )

    def test_small_class_rejected_with_name_and_size(self, tmp_path):
        real, synth = self.make_pair(tmp_path, n=3)
        with pytest.raises(ValueError, match="'ship' has 3"):
            stratified_kfold(real, synth, k=5)

    def test_fold_synthetic_mode(self, tmp_path):
        real, synth = self.make_pair(tmp_path)
        full = stratified_kfold(real, synth, k=5, seed=1)
        folded = stratified_kfold(real, synth, k=5, seed=1, fold_synthetic=True)
        assert any(full[key] != folded[key] for key in full)

    def test_fold_stats_validation(self):
        with pytest.raises(ValueError, match="mean"):
            FoldStats(mean=1.0, std=0.0, per_fold=(0.0, 0.0))
        with pytest.raises(ValueError, match="std"):
            FoldStats(mean=0.0, std=1.0, per_fold=(0.0, 0.0))
        fs = FoldStats.from_values([1.0, 2.0, 3.0])
        assert fs.mean == 2.0


class TestReport:
    def build(self, tmp_path, k=None):
        real = ingest_flat(tmp_path, "realds", (1, 2, 3, 4, 5))
        synth = ingest_flat(tmp_path, "synds", (6, 7, 8, 9, 10))
        return build_report(real, synth, k=k, seed=1, timestamp="2026-01-01T00:00:00Z")

    def test_round_trip_structurally_identical(self, tmp_path):
        report = self.build(tmp_path, k=5)
        out = tmp_path / "report"
        write_report(report, out)
        assert read_report(out) == report
        assert read_report(out / "report.json") == report

    def test_csv_row_count_and_columns(self, tmp_path):
        report = self.build(tmp_path, k=5)
        _, csv_path = write_report(report, tmp_path / "rep")
        with csv_path.open() as f:
            rows = list(csv.reader(f))
        assert rows[0] == [
            "dataset", "class", "kind", "kl", "js", "emd", "category",
            "kl_mean", "kl_std", "js_mean", "js_std", "emd_mean", "emd_std",
        ]
        # 1 dataset pair x 2 classes x 2 kinds
        assert len(rows) == 1 + 4

    def test_report_without_kfold_section(self, tmp_path):
        report = self.build(tmp_path, k=None)
        assert report.kfold == []
        json_path, csv_path = write_report(report, tmp_path / "rep2")
        data = json.loads(json_path.read_text())
        assert data["kfold"] == []
        with csv_path.open() as f:
            rows = list(csv.reader(f))
        assert all(cell == "" for row in rows[1:] for cell in row[7:])

    def test_no_shared_classes_lists_both_sides(self, tmp_path):
        root_a = tmp_path / "lonely_a"
        root_b = tmp_path / "lonely_b"
        write_class(root_a, "plane", [textured(1)])
        write_class(root_b, "ship", [textured(2)])
        with pytest.raises(ValueError, match="plane.*ship"):
            build_report(ingest(root_a, "real"), ingest(root_b, "synthetic"))

    def test_config_echo_fields(self, tmp_path):
        report = self.build(tmp_path, k=5)
        assert report.config["log_base"] == "e"
        assert report.config["epsilon"] == 1e-10
        assert report.config["pooling"] == "mean"
        assert report.config["gradient"] is True
        assert report.config["kfold"] == {"k": 5, "seed": 1, "fold_synthetic": False}

    def test_source_date_epoch_pins_timestamp(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        real = ingest_flat(tmp_path, "r2", (1, 2, 3, 4, 5))
        synth = ingest_flat(tmp_path, "s2", (6, 7, 8, 9, 10))
        r1 = build_report(real, synth, k=5, seed=0)
        r2 = build_report(real, synth, k=5, seed=0)
        assert r1 == r2
        write_report(r1, tmp_path / "o1")
        write_report(r2, tmp_path / "o2")
        assert (tmp_path / "o1" / "report.json").read_bytes() == (
            tmp_path / "o2" / "report.json"
        ).read_bytes()


def ingest_flat(tmp_path, name, seeds):
    root = tmp_path / name
    if not root.exists():
        write_class(root, "plane", [textured(s, side=24) for s in seeds])
        write_class(root, "ship", [textured(s + 50, side=24) for s in seeds])
    role = "real" if name.startswith("r") else "synthetic"
    return ingest(root, role, name=name)
