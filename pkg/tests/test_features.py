"""Histogram features: intensity, LBP codes, and dataset aggregation."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from acousim.features import (
    Histogram,
    aggregate,
    intensity_histogram,
    lbp_codes,
    lbp_histogram,
    write_histogram_csv,
    write_histogram_json,
)
from conftest import make_image, random_image


def lbp_oracle(pixels: np.ndarray) -> np.ndarray:
    """Double-loop LBP histogram: neighbor >= center, clockwise from top-left
    as bit 7 down to the left neighbor as bit 0, interior pixels only."""
    h, w = pixels.shape
    offsets = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]
    counts = np.zeros(256, dtype=np.int64)
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            code = 0
            for bit, (dy, dx) in enumerate(offsets):
                if pixels[y + dy, x + dx] >= pixels[y, x]:
                    code |= 1 << (7 - bit)
            counts[code] += 1
    return counts / ((h - 2) * (w - 2))


class TestIntensityHistogram:
    def test_constant_zero_is_delta_at_zero(self):
        hist = intensity_histogram(make_image(np.zeros((4, 4))))
        assert hist.bins[0] == 1.0
        assert hist.bins[1:].sum() == 0.0
        assert hist.kind == "intensity"

    def test_two_point_distribution(self):
        hist = intensity_histogram(make_image([[0, 0], [255, 255]]))
        assert hist.bins[0] == 0.5
        assert hist.bins[255] == 0.5

    def test_mass_sums_to_one(self, rng):
        for _ in range(20):
            img = random_image(rng, int(rng.integers(1, 30)), int(rng.integers(1, 30)))
            assert intensity_histogram(img).bins.sum() == pytest.approx(1.0, abs=1e-9)

    def test_permutation_invariance(self, rng):
        img = random_image(rng, 8, 8)
        shuffled = img.pixels.ravel().copy()
        rng.shuffle(shuffled)
        permuted = make_image(shuffled.reshape(8, 8))
        assert intensity_histogram(img) == intensity_histogram(permuted)


class TestLBPHistogram:
    def test_constant_image_all_codes_255(self):
        hist = lbp_histogram(make_image(np.full((5, 7), 42)))
        assert hist.bins[255] == 1.0
        assert hist.kind == "lbp"

    def test_strict_local_maximum_gives_code_zero(self):
        pixels = np.zeros((3, 3), dtype=np.uint8)
        pixels[1, 1] = 255
        hist = lbp_histogram(make_image(pixels))
        assert hist.bins[0] == 1.0

    def test_single_neighbor_bits(self):
        # one neighbor above center sets exactly one known bit; every
        # pixel lower than its neighborhood keeps the >= bits of equals
        pixels = np.full((3, 3), 100, dtype=np.uint8)
        pixels[0, 0] = 200  # top-left neighbor of the center
        codes = lbp_codes(make_image(pixels))
        assert codes.shape == (1, 1)
        assert codes[0, 0] == 255  # all neighbors >= center still

        pixels = np.full((3, 3), 100, dtype=np.uint8)
        pixels[1, 1] = 150
        pixels[0, 0] = 200  # only the top-left neighbor exceeds the center
        assert lbp_codes(make_image(pixels))[0, 0] == 0b10000000

    def test_matches_oracle_on_random_images(self, rng):
        for _ in range(30):
            h = int(rng.integers(3, 17))
            w = int(rng.integers(3, 17))
            img = random_image(rng, h, w)
            assert np.array_equal(lbp_histogram(img).bins, lbp_oracle(img.pixels))

    def test_shift_invariance_without_clamping(self, rng):
        pixels = rng.integers(0, 200, size=(9, 9), dtype=np.uint8)
        shifted = (pixels + 40).astype(np.uint8)
        assert lbp_histogram(make_image(pixels)) == lbp_histogram(make_image(shifted))

    def test_rejects_images_below_3x3(self):
        with pytest.raises(ValueError, match="3x3"):
            lbp_histogram(make_image([[1, 2], [3, 4]]))


class TestAggregate:
    def delta_hist(self, index, kind="intensity"):
        bins = np.zeros(256)
        bins[index] = 1.0
        return Histogram(bins, kind)

    def test_single_histogram_is_identity(self, rng):
        img = random_image(rng, 6, 6)
        hist = intensity_histogram(img)
        combined = aggregate([hist])
        assert np.allclose(combined.bins, hist.bins, atol=1e-15)

    def test_two_deltas_split_evenly(self):
        combined = aggregate([self.delta_hist(0), self.delta_hist(255)])
        assert combined.bins[0] == 0.5
        assert combined.bins[255] == 0.5

    def test_idempotent_on_copies(self, rng):
        hist = intensity_histogram(random_image(rng, 5, 5))
        combined = aggregate([hist] * 7)
        assert np.allclose(combined.bins, hist.bins, atol=1e-15)

    def test_weighted_pooling(self):
        combined = aggregate([self.delta_hist(0), self.delta_hist(255)], weights=[3, 1])
        assert combined.bins[0] == pytest.approx(0.75)
        assert combined.bins[255] == pytest.approx(0.25)

    def test_empty_list_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            aggregate([])

    def test_mixed_kinds_rejected(self):
        with pytest.raises(ValueError, match="mixed"):
            aggregate([self.delta_hist(0, "intensity"), self.delta_hist(0, "lbp")])


class TestHistogramType:
    def test_enforces_bin_count(self):
        with pytest.raises(ValueError, match="256"):
            Histogram(np.ones(8) / 8, "intensity")

    def test_enforces_normalization(self):
        with pytest.raises(ValueError, match="sum to 1"):
            Histogram(np.full(256, 0.5), "intensity")

    def test_enforces_non_negative(self):
        bins = np.zeros(256)
        bins[0], bins[1] = 1.5, -0.5
        with pytest.raises(ValueError, match="non-negative"):
            Histogram(bins, "intensity")

    def test_rejects_unknown_kind(self):
        bins = np.zeros(256)
        bins[0] = 1.0
        with pytest.raises(ValueError, match="kind"):
            Histogram(bins, "texture")


class TestExport:
    def test_csv_round_trip(self, rng, tmp_path):
        hist = intensity_histogram(random_image(rng, 7, 9))
        path = tmp_path / "h.csv"
        write_histogram_csv(hist, path)
        with path.open() as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["bin_index", "mass"]
        assert len(rows) == 257
        masses = np.array([float(r[1]) for r in rows[1:]])
        assert np.array_equal(masses, hist.bins)

    def test_json_array(self, rng, tmp_path):
        hist = intensity_histogram(random_image(rng, 4, 4))
        path = tmp_path / "h.json"
        write_histogram_json(hist, path)
        data = json.loads(path.read_text())
        assert isinstance(data, list) and len(data) == 256
        assert np.array_equal(np.array(data), hist.bins)
