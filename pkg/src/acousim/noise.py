"""Sensor noise: additive Gaussian followed by multiplicative speckle.

Pixel value v becomes (v + g) * s with g ~ Normal(0, gaussian_sigma^2) in
intensity units and s a unit-mean multiplicative speckle factor. Draws are
counter-based per pixel, so the output depends only on (image, config) and
never on evaluation order. Setting a sigma to zero disables that component
exactly; with both at zero the image passes through bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng
from .image import Image, round_half_up

SPECKLE_MODELS = ("gaussian", "exponential")

_GAUSSIAN_STREAM = 0x47
_SPECKLE_STREAM = 0x53


@dataclass(frozen=True)
class NoiseConfig:
    """Noise strengths in 8-bit intensity units (gaussian) and ratio (speckle).

    speckle_model "gaussian" draws factors from Normal(1, speckle_sigma^2)
    clamped at zero; "exponential" draws unit-mean exponential factors
    (fully developed speckle, spread fixed by the distribution) whenever
    speckle_sigma > 0.
    """

    gaussian_sigma: float = 8.0
    speckle_sigma: float = 0.15
    seed: int = 0
    speckle_model: str = "gaussian"

    def __post_init__(self):
        if not np.isfinite(self.gaussian_sigma) or self.gaussian_sigma < 0:
            raise ValueError(f"gaussian_sigma must be finite and >= 0, got {self.gaussian_sigma}")
        if not np.isfinite(self.speckle_sigma) or self.speckle_sigma < 0:
            raise ValueError(f"speckle_sigma must be finite and >= 0, got {self.speckle_sigma}")
        if self.speckle_model not in SPECKLE_MODELS:
            raise ValueError(
                f"unknown speckle_model {self.speckle_model!r}, expected one of {SPECKLE_MODELS}"
            )

    def to_dict(self) -> dict:
        return {
            "gaussian_sigma": self.gaussian_sigma,
            "speckle_sigma": self.speckle_sigma,
            "seed": self.seed,
            "speckle_model": self.speckle_model,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown noise config keys: {sorted(unknown)}")
        return cls(**data)


def apply_noise(img: Image, cfg: NoiseConfig) -> Image:
    """Degrade an image with additive Gaussian then multiplicative speckle."""
    values = img.pixels.astype(np.float64)
    index = np.arange(values.size).reshape(values.shape)

    if cfg.gaussian_sigma > 0:
        values = values + cfg.gaussian_sigma * rng.normal(cfg.seed, _GAUSSIAN_STREAM, index)

    if cfg.speckle_sigma > 0:
        if cfg.speckle_model == "gaussian":
            factors = 1.0 + cfg.speckle_sigma * rng.normal(cfg.seed, _SPECKLE_STREAM, index)
            factors = np.maximum(factors, 0.0)
        else:
            factors = -np.log1p(-rng.uniform(cfg.seed, _SPECKLE_STREAM, index))
        values = values * factors

    return Image(round_half_up(np.clip(values, 0.0, 255.0)).astype(np.uint8))
