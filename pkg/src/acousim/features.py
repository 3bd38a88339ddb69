"""Normalized 256-bin feature distributions: intensity and LBP histograms."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .image import Image

HISTOGRAM_BINS = 256
HISTOGRAM_KINDS = ("intensity", "lbp")

# 8-neighborhood offsets (row, col) clockwise from the top-left neighbor;
# the first entry is the most significant bit of the LBP code.
_LBP_NEIGHBORS = (
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
)


@dataclass(frozen=True, eq=False)
class Histogram:
    """Discrete distribution over 256 bins summing to one."""

    bins: np.ndarray
    kind: str

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.float64)
        if b.shape != (HISTOGRAM_BINS,):
            raise ValueError(f"histogram must have exactly {HISTOGRAM_BINS} bins, got shape {b.shape}")
        if b.min() < 0:
            raise ValueError("histogram bins must be non-negative")
        total = float(b.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"histogram mass must sum to 1 (got {total!r})")
        if self.kind not in HISTOGRAM_KINDS:
            raise ValueError(f"unknown histogram kind {self.kind!r}, expected one of {HISTOGRAM_KINDS}")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "bins", b)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.bins, other.bins)


def intensity_histogram(img: Image) -> Histogram:
    """Fraction of pixels at each of the 256 intensity levels."""
    counts = np.bincount(img.pixels.ravel(), minlength=HISTOGRAM_BINS)
    return Histogram(counts / img.pixels.size, "intensity")


def lbp_codes(img: Image) -> np.ndarray:
    """8-bit local binary pattern code for every interior pixel.

    Each neighbor >= center comparison contributes one bit, clockwise from
    the top-left neighbor (bit 7) around to the left neighbor (bit 0).
    Border pixels are excluded: padding would invent texture.
    """
    if img.width < 3 or img.height < 3:
        raise ValueError(f"LBP needs a 3x3 neighborhood, got {img.width}x{img.height}")
    p = img.pixels
    center = p[1:-1, 1:-1]
    codes = np.zeros(center.shape, dtype=np.uint8)
    for bit, (dr, dc) in enumerate(_LBP_NEIGHBORS):
        neighbor = p[1 + dr : p.shape[0] - 1 + dr, 1 + dc : p.shape[1] - 1 + dc]
        codes |= ((neighbor >= center) << np.uint8(7 - bit)).astype(np.uint8)
    return codes


def lbp_histogram(img: Image) -> Histogram:
    """Distribution of LBP codes over the interior pixels."""
    codes = lbp_codes(img)
    counts = np.bincount(codes.ravel(), minlength=HISTOGRAM_BINS)
    return Histogram(counts / codes.size, "lbp")


def aggregate(histograms: Sequence[Histogram], weights: Iterable[float] | None = None) -> Histogram:
    """Combine per-image histograms into one dataset-level distribution.

    By default each histogram contributes equally (mean of the normalized
    histograms); pass pixel counts as weights to pool raw counts instead.
    """
    histograms = list(histograms)
    if not histograms:
        raise ValueError("cannot aggregate an empty histogram list")
    kinds = {h.kind for h in histograms}
    if len(kinds) > 1:
        raise ValueError(f"cannot aggregate mixed histogram kinds: {sorted(kinds)}")
    stacked = np.stack([h.bins for h in histograms])
    if weights is None:
        combined = stacked.mean(axis=0)
    else:
        combined = np.average(stacked, axis=0, weights=np.asarray(list(weights), dtype=np.float64))
    return Histogram(combined / combined.sum(), histograms[0].kind)


def write_histogram_csv(hist: Histogram, path) -> None:
    """Write (bin_index, mass) rows for external plotting."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["bin_index", "mass"])
        for i, mass in enumerate(hist.bins):
            writer.writerow([i, repr(float(mass))])


def write_histogram_json(hist: Histogram, path) -> None:
    """Write the 256 bin masses as a plain JSON array."""
    Path(path).write_text(json.dumps([float(m) for m in hist.bins]), encoding="utf-8")
