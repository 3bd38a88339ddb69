"""Shared test helpers and the acceptance-suite summary hook."""

from __future__ import annotations

import numpy as np
import pytest

from acousim.image import Image


def make_image(rows) -> Image:
    return Image(np.asarray(rows, dtype=np.uint8))


def random_image(rng: np.random.Generator, height: int, width: int) -> Image:
    return Image(rng.integers(0, 256, size=(height, width), dtype=np.uint8))


def random_distribution(rng: np.random.Generator, bins: int, sparse: bool = False) -> np.ndarray:
    raw = rng.random(bins)
    if sparse:
        raw = raw * (rng.random(bins) < 0.5)
        if raw.sum() == 0:
            raw[int(rng.integers(bins))] = 1.0
    return raw / raw.sum()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240811)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print one pass/fail line per acceptance criterion at the end of a run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in nodeid:
                name = nodeid.split("::", 1)[1]
                lines.append((name, outcome.upper()))
    if not lines:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(lines):
        terminalreporter.write_line(f"{outcome:6s} {name}")
