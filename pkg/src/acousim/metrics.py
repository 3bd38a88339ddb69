"""Distribution distances (KL, JS, EMD) and the alignment category scale.

All divergences use the natural logarithm, so JS is bounded by ln 2. EMD
places bin i at position i/(B-1), making the support [0, 1]; for 1-D
histograms the minimum transport cost equals the integrated absolute CDF
difference, so no transport plan is ever materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .features import Histogram

LN2 = math.log(2.0)

CATEGORY_HIGH = "High"
CATEGORY_MODERATE = "Moderate"
CATEGORY_LOW = "Low"
KL_HIGH_BELOW = 0.2
KL_MODERATE_BELOW = 0.7


@dataclass(frozen=True)
class SmoothingPolicy:
    """Mass added to every bin before KL/JS so zero bins stay finite."""

    epsilon: float = 1e-10

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"smoothing epsilon must be > 0, got {self.epsilon}")


@dataclass(frozen=True)
class AlignmentResult:
    """KL, JS, EMD plus the category implied by the KL value."""

    kl: float
    js: float
    emd: float
    category: str

    def __post_init__(self):
        if self.js > LN2 + 1e-12:
            raise ValueError(f"JS divergence {self.js} exceeds ln 2")
        if not -1e-12 <= self.emd <= 1.0 + 1e-12:
            raise ValueError(f"EMD {self.emd} outside [0, 1]")
        if self.category != categorize(self.kl):
            raise ValueError(
                f"category {self.category!r} inconsistent with kl={self.kl}"
            )

    def to_dict(self) -> dict:
        return {"kl": self.kl, "js": self.js, "emd": self.emd, "category": self.category}


def _paired(p, q) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(p, Histogram) and isinstance(q, Histogram) and p.kind != q.kind:
        raise ValueError(f"histogram kind mismatch: {p.kind!r} vs {q.kind!r}")
    pa = np.asarray(p.bins if isinstance(p, Histogram) else p, dtype=np.float64)
    qa = np.asarray(q.bins if isinstance(q, Histogram) else q, dtype=np.float64)
    if pa.ndim != 1 or qa.ndim != 1:
        raise ValueError("distributions must be 1-D")
    if pa.shape != qa.shape:
        raise ValueError(f"bin count mismatch: {pa.size} vs {qa.size}")
    if pa.min() < 0 or qa.min() < 0:
        raise ValueError("distributions must be non-negative")
    return pa, qa


def _smooth(dist: np.ndarray, epsilon: float) -> np.ndarray:
    smoothed = dist + epsilon
    return smoothed / smoothed.sum()


def kl_divergence(p, q, smoothing: SmoothingPolicy = SmoothingPolicy()) -> float:
    """Directional information loss, in nats, after epsilon smoothing."""
    pa, qa = _paired(p, q)
    ps = _smooth(pa, smoothing.epsilon)
    qs = _smooth(qa, smoothing.epsilon)
    return max(0.0, float(np.sum(ps * np.log(ps / qs))))


def js_divergence(p, q, smoothing: SmoothingPolicy = SmoothingPolicy()) -> float:
    """Symmetric bounded divergence via the mixture of the smoothed inputs."""
    pa, qa = _paired(p, q)
    ps = _smooth(pa, smoothing.epsilon)
    qs = _smooth(qa, smoothing.epsilon)
    mix = 0.5 * (ps + qs)
    value = 0.5 * float(np.sum(ps * np.log(ps / mix))) + 0.5 * float(
        np.sum(qs * np.log(qs / mix))
    )
    return max(0.0, value)


def emd_1d(p, q) -> float:
    """Minimum transport cost between 1-D histograms on a [0, 1] support.

    Computed in closed form as sum_i |CDF_p(i) - CDF_q(i)| / (B - 1); zero
    bins need no smoothing here.
    """
    pa, qa = _paired(p, q)
    if pa.size < 2:
        raise ValueError("EMD needs at least 2 bins")
    return float(np.sum(np.abs(np.cumsum(pa - qa)))) / (pa.size - 1)


def categorize(kl: float) -> str:
    """Alignment category for a KL value: High / Moderate / Low."""
    if not np.isfinite(kl) or kl < 0:
        raise ValueError(f"KL value must be finite and >= 0, got {kl}")
    if kl < KL_HIGH_BELOW:
        return CATEGORY_HIGH
    if kl < KL_MODERATE_BELOW:
        return CATEGORY_MODERATE
    return CATEGORY_LOW


def compare(p, q, smoothing: SmoothingPolicy = SmoothingPolicy()) -> AlignmentResult:
    """All three metrics plus the category, bundled for one comparison."""
    kl = kl_divergence(p, q, smoothing)
    return AlignmentResult(
        kl=kl,
        js=js_divergence(p, q, smoothing),
        emd=emd_1d(p, q),
        category=categorize(kl),
    )
