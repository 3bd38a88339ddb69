"""8-bit grayscale raster type, preprocessing operations, and image file I/O.

All operations are pure: identical inputs give bit-identical outputs, and no
function mutates its arguments.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

GRAY_WEIGHTS = (0.299, 0.587, 0.114)
DEFAULT_CROP_MARGIN = 0.25
TARGET_SIZE = 256

# Largest possible 3x3 Sobel response on 8-bit input; fixed so the output
# scale is identical for every image (per-image normalization would make
# intensity distributions content-dependent).
SOBEL_MAX_RESPONSE = 255.0 * 4.0 * np.sqrt(2.0)


def round_half_up(values):
    """Round non-negative values to the nearest integer, halves upward."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


@dataclass(frozen=True, eq=False)
class Image:
    """Grayscale raster: a read-only (height, width) array of uint8 values.

    Pixels are row-major with intensities in [0, 255]. Images as small as
    1x1 are representable; operations needing a 3x3 neighborhood (gradient
    magnitude, LBP) enforce their own minimum size.
    """

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"image must be 2-D, got {px.ndim} dimension(s)")
        if px.size == 0:
            raise ValueError("image must be non-empty")
        if px.dtype != np.uint8:
            if px.dtype.kind not in "iu":
                raise ValueError(f"pixel values must be integers, got dtype {px.dtype}")
            if px.min() < 0 or px.max() > 255:
                raise ValueError("pixel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        else:
            px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __repr__(self) -> str:
        return f"Image({self.width}x{self.height})"


@dataclass(frozen=True)
class BoundingBox:
    """Inclusive pixel rectangle: both corners are inside the box."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int

    def __post_init__(self):
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError(f"bounding box corners must be non-negative: {self}")
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValueError(f"bounding box corners are inverted: {self}")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    def validate_for(self, img: Image) -> None:
        if self.x_max >= img.width or self.y_max >= img.height:
            raise ValueError(
                f"bounding box {self} exceeds image bounds {img.width}x{img.height}"
            )

    def to_list(self) -> list[int]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


def to_grayscale(raw) -> Image:
    """Convert a 1- or 3-channel 8-bit raster to a grayscale image.

    3-channel input is reduced with the 0.299/0.587/0.114 luma weights and
    rounded half up; 1-channel input passes through unchanged.
    """
    arr = np.asarray(raw)
    if arr.ndim == 2:
        return Image(arr)
    if arr.ndim == 3:
        channels = arr.shape[2]
        if channels == 1:
            return Image(arr[:, :, 0])
        if channels == 3:
            luma = (
                GRAY_WEIGHTS[0] * arr[:, :, 0].astype(np.float64)
                + GRAY_WEIGHTS[1] * arr[:, :, 1].astype(np.float64)
                + GRAY_WEIGHTS[2] * arr[:, :, 2].astype(np.float64)
            )
            return Image(round_half_up(luma).astype(np.uint8))
        raise ValueError(f"unsupported channel count: {channels} (expected 1 or 3)")
    raise ValueError(f"raster must be 2-D or 3-D, got {arr.ndim} dimension(s)")


def resize(img: Image, target_w: int, target_h: int) -> Image:
    """Bilinear resize with half-pixel center alignment.

    Resizing to the source dimensions is the exact identity.
    """
    if target_w < 1 or target_h < 1:
        raise ValueError(f"degenerate resize target {target_w}x{target_h}")
    src = img.pixels.astype(np.float64)
    h, w = src.shape

    xs = np.clip((np.arange(target_w) + 0.5) * (w / target_w) - 0.5, 0.0, w - 1.0)
    ys = np.clip((np.arange(target_h) + 0.5) * (h / target_h) - 0.5, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = (ys - y0)[:, None]

    top = src[np.ix_(y0, x0)] * (1.0 - fx) + src[np.ix_(y0, x1)] * fx
    bottom = src[np.ix_(y1, x0)] * (1.0 - fx) + src[np.ix_(y1, x1)] * fx
    values = top * (1.0 - fy) + bottom * fy
    return Image(round_half_up(values).astype(np.uint8))


def gradient_magnitude(img: Image) -> Image:
    """Sobel gradient magnitude with a fixed global intensity scale.

    Interior pixels get sqrt(gx^2 + gy^2) scaled by 255 / SOBEL_MAX_RESPONSE
    and rounded; the 1-pixel border replicates the nearest interior result.
    """
    if img.width < 3 or img.height < 3:
        raise ValueError(
            f"gradient magnitude needs a 3x3 neighborhood, got {img.width}x{img.height}"
        )
    p = img.pixels.astype(np.float64)
    gx = (p[:-2, 2:] + 2.0 * p[1:-1, 2:] + p[2:, 2:]) - (
        p[:-2, :-2] + 2.0 * p[1:-1, :-2] + p[2:, :-2]
    )
    gy = (p[2:, :-2] + 2.0 * p[2:, 1:-1] + p[2:, 2:]) - (
        p[:-2, :-2] + 2.0 * p[:-2, 1:-1] + p[:-2, 2:]
    )
    interior = round_half_up(np.hypot(gx, gy) * (255.0 / SOBEL_MAX_RESPONSE)).astype(
        np.uint8
    )

    out = np.empty((img.height, img.width), dtype=np.uint8)
    out[1:-1, 1:-1] = interior
    out[0, 1:-1] = interior[0]
    out[-1, 1:-1] = interior[-1]
    out[1:-1, 0] = interior[:, 0]
    out[1:-1, -1] = interior[:, -1]
    out[0, 0] = interior[0, 0]
    out[0, -1] = interior[0, -1]
    out[-1, 0] = interior[-1, 0]
    out[-1, -1] = interior[-1, -1]
    return Image(out)


def expand_bbox(bbox: BoundingBox, margin: float, width: int, height: int) -> BoundingBox:
    """Grow a box on each side by margin x max(box width, box height), clamped."""
    pad = int(round_half_up(margin * max(bbox.width, bbox.height)))
    return BoundingBox(
        max(0, bbox.x_min - pad),
        max(0, bbox.y_min - pad),
        min(width - 1, bbox.x_max + pad),
        min(height - 1, bbox.y_max + pad),
    )


def subset_crop(
    img: Image,
    bbox: BoundingBox,
    margin: float = DEFAULT_CROP_MARGIN,
    target_size: int = TARGET_SIZE,
) -> Image:
    """Crop around a box with proportional margin and resize to a square.

    The crop window is the box expanded on each side by margin times its
    larger dimension, clamped to the image, then resized to
    target_size x target_size.
    """
    if margin < 0:
        raise ValueError(f"crop margin must be >= 0, got {margin}")
    bbox.validate_for(img)
    window = expand_bbox(bbox, margin, img.width, img.height)
    crop = img.pixels[window.y_min : window.y_max + 1, window.x_min : window.x_max + 1]
    return resize(Image(crop), target_size, target_size)


def read_png(path) -> np.ndarray:
    """Read an image file as (H, W) uint8 grayscale or (H, W, 3) uint8 RGB."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            if im.mode == "L":
                return np.asarray(im, dtype=np.uint8)
            if im.mode != "RGB":
                im = im.convert("RGB")
            return np.asarray(im, dtype=np.uint8)
    except OSError as exc:
        raise ValueError(f"cannot decode image file {path}: {exc}") from exc


def load_image(path) -> Image:
    """Read an image file and convert it to grayscale."""
    return to_grayscale(read_png(path))


def write_png(img: Image, path) -> None:
    PILImage.fromarray(img.pixels, mode="L").save(Path(path), format="PNG")


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM (P5) file as a float64 array normalized to [0, 1]."""
    path = Path(path)
    data = path.read_bytes()

    # header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments running to end of line
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise ValueError(f"truncated PGM header in {path}")
        ch = data[pos : pos + 1]
        if ch == b"#":
            eol = data.find(b"\n", pos)
            pos = len(data) if eol < 0 else eol + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    pos += 1  # single whitespace byte after maxval

    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM (P5) file: {path}")
    width, height, maxval = (int(t) for t in tokens[1:4])
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise ValueError(f"invalid PGM dimensions/maxval in {path}")

    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    count = width * height
    if len(data) - pos < count * dtype.itemsize:
        raise ValueError(f"truncated PGM raster in {path}")
    raster = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    return raster.reshape(height, width).astype(np.float64) / float(maxval)
