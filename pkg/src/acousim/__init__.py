"""acousim: sonar-style image simulation and statistical sim-to-real validation.

The package has two halves: a deterministic top-down renderer that produces
sonar-like grayscale frames (seabed texture, object shadows, sensor noise),
and a validation engine that quantifies the distribution-level gap between
two image sets with KL/JS divergences and the earth mover's distance over
intensity and LBP texture histograms.
"""

__version__ = "0.1.0"

from .image import BoundingBox, Image  # noqa: E402
from .scene import HeightField, ObjectParams, RenderOutput, SceneConfig, render  # noqa: E402
from .noise import NoiseConfig, apply_noise  # noqa: E402
from .features import Histogram, aggregate, intensity_histogram, lbp_histogram  # noqa: E402
from .metrics import (  # noqa: E402
    AlignmentResult,
    SmoothingPolicy,
    categorize,
    compare,
    emd_1d,
    js_divergence,
    kl_divergence,
)
from .pipeline import (  # noqa: E402
    DatasetManifest,
    FoldStats,
    PipelineOptions,
    ValidationReport,
    build_report,
    dataset_alignment,
    ingest,
    read_report,
    stratified_kfold,
    write_report,
)

__all__ = [
    "__version__",
    "AlignmentResult",
    "BoundingBox",
    "DatasetManifest",
    "FoldStats",
    "HeightField",
    "Histogram",
    "Image",
    "NoiseConfig",
    "ObjectParams",
    "PipelineOptions",
    "RenderOutput",
    "SceneConfig",
    "SmoothingPolicy",
    "ValidationReport",
    "aggregate",
    "apply_noise",
    "build_report",
    "categorize",
    "compare",
    "dataset_alignment",
    "emd_1d",
    "ingest",
    "intensity_histogram",
    "js_divergence",
    "kl_divergence",
    "lbp_histogram",
    "read_report",
    "render",
    "stratified_kfold",
    "write_report",
]
