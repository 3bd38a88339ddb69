"""Deterministic top-down scene renderer.

A scene is a flat seabed heightfield with one parametric object stamped on
it. The rendered intensity at each pixel is the product of an illumination
map (directional light, hard ray-marched shadows, ambient floor) and a
fractal-noise reflectance map. The ground footprint scales with platform
altitude and field of view, so object apparent size follows altitude.

Coordinate conventions: image x runs along columns, y along rows. The light
azimuth (yaw) is measured from +x toward +y, so yaw 0 puts the light source
toward +x and shadows fall toward -x. Pitch is the light elevation above
the ground plane; roll orients a linear ambient asymmetry gradient across
the image with amplitude sin(roll).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import rng
from .image import BoundingBox, Image, read_pgm, round_half_up

OBJECT_CLASSES = ("plane", "ship", "custom")
ALTITUDE_RANGE_M = (10.0, 20.0)
HIGHLIGHT_BOOST = 0.3

# hash-stream tags so texture octaves never collide with other draws
_TEXTURE_STREAM = 0x54


@dataclass(frozen=True)
class ObjectParams:
    """Parametric object geometry in meters on the seabed plane.

    Position (x_m, y_m) is the offset of the object center from the middle
    of the ground footprint; heading rotates the object in the ground plane.
    For the plane class, wingspan/wing chord default to fractions of the
    fuselage length when left unset. The custom class samples heights from
    a PGM file scaled to length_m x beam_m x height_m.
    """

    length_m: float = 10.0
    beam_m: float = 2.0
    height_m: float = 2.0
    x_m: float = 0.0
    y_m: float = 0.0
    heading_deg: float = 0.0
    wingspan_m: float | None = None
    wing_chord_m: float | None = None
    wing_height_frac: float = 0.5
    heightfield_path: str | None = None

    def __post_init__(self):
        if self.length_m <= 0 or self.beam_m <= 0:
            raise ValueError("object length and beam must be positive")
        if self.height_m < 0:
            raise ValueError("object height must be >= 0")
        if not 0 < self.wing_height_frac <= 1:
            raise ValueError("wing_height_frac must be in (0, 1]")


@dataclass(frozen=True)
class SceneConfig:
    """Declarative description of one rendered frame."""

    seed: int = 0
    altitude_m: float = 15.0
    fov_deg: float = 60.0
    illum_yaw_deg: float = 0.0
    illum_pitch_deg: float = 45.0
    illum_roll_deg: float = 0.0
    object_class: str = "ship"
    object_params: ObjectParams = field(default_factory=ObjectParams)
    texture_octaves: int = 4
    texture_persistence: float = 0.5
    texture_base_freq: float = 0.5
    reflectance_range: tuple[float, float] = (0.2, 0.8)
    ambient: float = 0.15
    shadow_level: float = 0.05
    image_size: int = 256

    def __post_init__(self):
        if self.object_class not in OBJECT_CLASSES:
            raise ValueError(
                f"unknown object_class {self.object_class!r}, expected one of {OBJECT_CLASSES}"
            )
        if not 0.0 < self.illum_pitch_deg <= 90.0:
            raise ValueError(f"illum_pitch_deg must be in (0, 90], got {self.illum_pitch_deg}")
        if not 0.0 < self.fov_deg < 180.0:
            raise ValueError(f"fov_deg must be in (0, 180), got {self.fov_deg}")
        r_min, r_max = self.reflectance_range
        if not 0.0 <= r_min <= r_max <= 1.0:
            raise ValueError(f"reflectance_range must satisfy 0 <= min <= max <= 1, got {self.reflectance_range}")
        if not 0.0 <= self.ambient < 1.0:
            raise ValueError(f"ambient must be in [0, 1), got {self.ambient}")
        if not 0.0 <= self.shadow_level <= self.ambient:
            raise ValueError(
                f"shadow_level must be in [0, ambient={self.ambient}], got {self.shadow_level}"
            )
        if self.texture_octaves < 1:
            raise ValueError("texture_octaves must be >= 1")
        if self.texture_persistence <= 0 or self.texture_base_freq <= 0:
            raise ValueError("texture persistence and base frequency must be positive")
        if self.image_size < 3:
            raise ValueError("image_size must be >= 3")
        if not ALTITUDE_RANGE_M[0] <= self.altitude_m <= ALTITUDE_RANGE_M[1]:
            warnings.warn(
                f"altitude {self.altitude_m} m is outside the calibrated envelope "
                f"{ALTITUDE_RANGE_M[0]}-{ALTITUDE_RANGE_M[1]} m",
                stacklevel=3,
            )
        object.__setattr__(self, "illum_yaw_deg", self.illum_yaw_deg % 360.0)
        object.__setattr__(self, "reflectance_range", (float(r_min), float(r_max)))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["object_params"] = {
            k: v for k, v in out["object_params"].items() if v is not None
        }
        out["reflectance_range"] = list(self.reflectance_range)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SceneConfig":
        data = dict(data)
        obj = data.pop("object_params", {})
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scene config keys: {sorted(unknown)}")
        obj_known = {f for f in ObjectParams.__dataclass_fields__}
        obj_unknown = set(obj) - obj_known
        if obj_unknown:
            raise ValueError(f"unknown object_params keys: {sorted(obj_unknown)}")
        if "reflectance_range" in data:
            data["reflectance_range"] = tuple(data["reflectance_range"])
        return cls(object_params=ObjectParams(**obj), **data)


@dataclass(frozen=True, eq=False)
class HeightField:
    """Regular grid of terrain heights in meters (row-major cells)."""

    cell_size_m: float
    heights: np.ndarray

    def __post_init__(self):
        h = np.asarray(self.heights, dtype=np.float64)
        if h.ndim != 2 or h.size == 0:
            raise ValueError("heights must be a non-empty 2-D array")
        if self.cell_size_m <= 0:
            raise ValueError("cell size must be positive")
        if not np.all(np.isfinite(h)) or h.min() < 0:
            raise ValueError("heights must be finite and >= 0")
        h = h.copy()
        h.setflags(write=False)
        object.__setattr__(self, "heights", h)

    @property
    def width(self) -> int:
        return self.heights.shape[1]

    @property
    def height(self) -> int:
        return self.heights.shape[0]


@dataclass(frozen=True, eq=False)
class RenderOutput:
    """Rendered frame plus the geometry needed for downstream subsetting."""

    image: Image
    object_bbox: BoundingBox
    shadow_mask: np.ndarray
    meters_per_pixel: float

    def __post_init__(self):
        mask = np.asarray(self.shadow_mask, dtype=bool)
        if mask.shape != (self.image.height, self.image.width):
            raise ValueError("shadow mask dimensions must match the image")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "shadow_mask", mask)
        self.object_bbox.validate_for(self.image)


def footprint_m(cfg: SceneConfig) -> float:
    """Side length of the square ground patch imaged from the platform."""
    return 2.0 * cfg.altitude_m * math.tan(math.radians(cfg.fov_deg) / 2.0)


def meters_per_pixel(cfg: SceneConfig) -> float:
    return footprint_m(cfg) / cfg.image_size


def _grid_coords(cfg: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    """World coordinates (meters) of cell centers, origin at footprint center."""
    side = footprint_m(cfg)
    step = meters_per_pixel(cfg)
    coords = (np.arange(cfg.image_size) + 0.5) * step - side / 2.0
    return np.meshgrid(coords, coords)  # (X over columns, Y over rows)


def _half_ellipsoid(
    u: np.ndarray, v: np.ndarray, semi_u: float, semi_v: float, peak: float
) -> tuple[np.ndarray, np.ndarray]:
    s = (u / semi_u) ** 2 + (v / semi_v) ** 2
    support = s <= 1.0
    heights = peak * np.sqrt(np.maximum(0.0, 1.0 - s))
    return np.where(support, heights, 0.0), support


def _plane_wing_dims(obj: ObjectParams) -> tuple[float, float]:
    span = obj.wingspan_m if obj.wingspan_m is not None else 0.9 * obj.length_m
    chord = obj.wing_chord_m if obj.wing_chord_m is not None else 0.25 * obj.length_m
    return span, chord


def _object_stamp(cfg: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    """Heights (meters) and ground-support mask of the object on the grid."""
    obj = cfg.object_params
    x, y = _grid_coords(cfg)
    heading = math.radians(obj.heading_deg)
    cos_h, sin_h = math.cos(heading), math.sin(heading)
    dx = x - obj.x_m
    dy = y - obj.y_m
    u = dx * cos_h + dy * sin_h  # along-object axis
    v = -dx * sin_h + dy * cos_h  # across-object axis

    if cfg.object_class == "ship":
        return _half_ellipsoid(u, v, obj.length_m / 2.0, obj.beam_m / 2.0, obj.height_m)

    if cfg.object_class == "plane":
        span, chord = _plane_wing_dims(obj)
        fus_h, fus_s = _half_ellipsoid(
            u, v, obj.length_m / 2.0, obj.beam_m / 2.0, obj.height_m
        )
        wing_h, wing_s = _half_ellipsoid(
            u, v, chord / 2.0, span / 2.0, obj.height_m * obj.wing_height_frac
        )
        return np.maximum(fus_h, wing_h), fus_s | wing_s

    if obj.heightfield_path is None:
        raise ValueError("custom object class requires object_params.heightfield_path")
    relief = read_pgm(obj.heightfield_path)
    rows, cols = relief.shape
    inside = (np.abs(u) <= obj.length_m / 2.0) & (np.abs(v) <= obj.beam_m / 2.0)
    # map object-frame coords onto the relief raster (u along columns)
    px = (u / obj.length_m + 0.5) * (cols - 1)
    py = (v / obj.beam_m + 0.5) * (rows - 1)
    sampled = _bilinear_lookup(relief, np.clip(px, 0, cols - 1), np.clip(py, 0, rows - 1))
    heights = np.where(inside, sampled * obj.height_m, 0.0)
    return heights, inside & (sampled > 0.0)


def _object_extent_m(cfg: SceneConfig) -> float:
    obj = cfg.object_params
    if cfg.object_class == "plane":
        span, chord = _plane_wing_dims(obj)
        return max(obj.length_m, obj.beam_m, span, chord)
    return max(obj.length_m, obj.beam_m)


def build_heightfield(cfg: SceneConfig) -> HeightField:
    """Flat seabed at height zero with the configured object stamped on it."""
    heights, _ = _object_stamp(cfg)
    return HeightField(cell_size_m=meters_per_pixel(cfg), heights=heights)


def _fade(t: np.ndarray) -> np.ndarray:
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _value_noise(seed: int, octave: int, x_m: np.ndarray, y_m: np.ndarray, freq: float) -> np.ndarray:
    """Smooth lattice value noise in [0, 1] at the given spatial frequency."""
    gx = x_m * freq
    gy = y_m * freq
    ix = np.floor(gx).astype(np.int64)
    iy = np.floor(gy).astype(np.int64)
    tx = _fade(gx - ix)
    ty = _fade(gy - iy)
    v00 = rng.uniform(seed, _TEXTURE_STREAM, octave, ix, iy)
    v01 = rng.uniform(seed, _TEXTURE_STREAM, octave, ix + 1, iy)
    v10 = rng.uniform(seed, _TEXTURE_STREAM, octave, ix, iy + 1)
    v11 = rng.uniform(seed, _TEXTURE_STREAM, octave, ix + 1, iy + 1)
    top = v00 + tx * (v01 - v00)
    bottom = v10 + tx * (v11 - v10)
    return top + ty * (bottom - top)


def _fractal_noise(cfg: SceneConfig) -> np.ndarray:
    x, y = _grid_coords(cfg)
    total = np.zeros_like(x)
    amplitude = 1.0
    amplitude_sum = 0.0
    for octave in range(cfg.texture_octaves):
        freq = cfg.texture_base_freq * (2.0**octave)
        total += amplitude * _value_noise(cfg.seed, octave, x, y, freq)
        amplitude_sum += amplitude
        amplitude *= cfg.texture_persistence
    return total / amplitude_sum


def reflectance_map(cfg: SceneConfig) -> np.ndarray:
    """Seabed reflectance raster in [r_min, min(1, r_max + HIGHLIGHT_BOOST)].

    Fractal value noise is mapped affinely into the configured reflectance
    range; object support cells are boosted toward full reflectance to give
    the object a bright return against its shadow.
    """
    r_min, r_max = cfg.reflectance_range
    refl = r_min + (r_max - r_min) * _fractal_noise(cfg)
    _, support = _object_stamp(cfg)
    return np.where(support, np.minimum(refl + HIGHLIGHT_BOOST, 1.0), refl)


def _bilinear_lookup(grid: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample a 2-D grid at fractional (column, row) positions inside bounds."""
    rows, cols = grid.shape
    x0 = np.minimum(np.floor(xs).astype(np.intp), max(cols - 2, 0))
    y0 = np.minimum(np.floor(ys).astype(np.intp), max(rows - 2, 0))
    x1 = np.minimum(x0 + 1, cols - 1)
    y1 = np.minimum(y0 + 1, rows - 1)
    fx = xs - x0
    fy = ys - y0
    top = grid[y0, x0] * (1.0 - fx) + grid[y0, x1] * fx
    bottom = grid[y1, x0] * (1.0 - fx) + grid[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def _ray_box_entry_steps(
    p: np.ndarray, d: float, lo: float, hi: float
) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell step interval during which p + t*d lies inside [lo, hi]."""
    if abs(d) < 1e-12:
        inside = (p >= lo) & (p <= hi)
        enter = np.where(inside, -np.inf, np.inf)
        leave = np.where(inside, np.inf, -np.inf)
        return enter, leave
    a = (lo - p) / d
    b = (hi - p) / d
    return np.minimum(a, b), np.maximum(a, b)


def _march_shadow(heights: np.ndarray, cell_size: float, yaw_deg: float, pitch_deg: float) -> np.ndarray:
    """Boolean mask of cells whose ray toward the light hits higher terrain.

    Rays climb at tan(pitch) per horizontal meter and advance one cell per
    step with bilinear terrain lookup; a cell is shadowed on the first step
    where the terrain rises strictly above the ray. Terrain is zero outside
    the object's support box, so only cells whose ray enters the padded box
    need to march at all; samples elsewhere cannot exceed a climbing ray.
    """
    rows, cols = heights.shape
    shadow = np.zeros(heights.size, dtype=bool)
    h_max = float(heights.max())
    if h_max <= 0.0:
        return shadow.reshape(rows, cols)

    yaw = math.radians(yaw_deg)
    dx, dy = math.cos(yaw), math.sin(yaw)
    rise = math.tan(math.radians(pitch_deg)) * cell_size

    occ_rows, occ_cols = np.nonzero(heights > 0.0)
    x_lo, x_hi = occ_cols.min() - 1.0, occ_cols.max() + 1.0
    y_lo, y_hi = occ_rows.min() - 1.0, occ_rows.max() + 1.0

    flat = heights.ravel()
    x0 = np.tile(np.arange(cols, dtype=np.float64), rows)
    y0 = np.repeat(np.arange(rows, dtype=np.float64), cols)

    enter_x, leave_x = _ray_box_entry_steps(x0, dx, x_lo, x_hi)
    enter_y, leave_y = _ray_box_entry_steps(y0, dy, y_lo, y_hi)
    enter = np.maximum(np.maximum(enter_x, enter_y), 1.0)
    leave = np.minimum(np.minimum(leave_x, leave_y), (h_max - flat) / rise)
    candidate = enter <= leave
    if not candidate.any():
        return shadow.reshape(rows, cols)

    idx = np.flatnonzero(candidate)
    # the loop samples at step + 1 first: start one short of floor(enter)
    step = np.maximum(np.floor(enter[idx]) - 1.0, 0.0)
    end = leave[idx]
    x = x0[idx] + dx * step
    y = y0[idx] + dy * step
    ray = flat[idx] + rise * step

    while idx.size:
        step = step + 1.0
        x = x + dx
        y = y + dy
        ray = ray + rise
        keep = (
            (x >= 0)
            & (x <= cols - 1)
            & (y >= 0)
            & (y <= rows - 1)
            & (ray < h_max)
            & (step <= end + 1.0)
        )
        if not keep.any():
            break
        x, y, ray, idx, step, end = (
            x[keep],
            y[keep],
            ray[keep],
            idx[keep],
            step[keep],
            end[keep],
        )
        hit = _bilinear_lookup(heights, x, y) > ray
        if hit.any():
            shadow[idx[hit]] = True
            miss = ~hit
            x, y, ray, idx, step, end = (
                x[miss],
                y[miss],
                ray[miss],
                idx[miss],
                step[miss],
                end[miss],
            )
    return shadow.reshape(rows, cols)


def _roll_gradient(light: np.ndarray, roll_deg: float) -> np.ndarray:
    """Multiplicative linear ambient asymmetry across the image.

    The gradient runs perpendicular to the roll axis with edge amplitude
    sin(roll); the result is clamped to [0, 1].
    """
    amplitude = math.sin(math.radians(roll_deg))
    if amplitude != 0.0:
        rows, cols = light.shape
        xn = (np.arange(cols) + 0.5) / cols * 2.0 - 1.0
        yn = (np.arange(rows) + 0.5) / rows * 2.0 - 1.0
        roll = math.radians(roll_deg)
        px, py = -math.sin(roll), math.cos(roll)
        t = px * xn[None, :] + py * yn[:, None]
        t = t / (abs(px) + abs(py))
        light = light * (1.0 + amplitude * t)
    return np.clip(light, 0.0, 1.0)


def shadow_and_light(field: HeightField, cfg: SceneConfig) -> tuple[np.ndarray, np.ndarray]:
    """Illumination map in [0, 1] plus the boolean shadow mask.

    Shadowed cells get the flat shadow_level floor; lit cells get
    ambient + (1 - ambient) * max(0, n . d) for surface normal n and light
    direction d, then the roll asymmetry gradient.
    """
    heights = field.heights
    shadow = _march_shadow(heights, field.cell_size_m, cfg.illum_yaw_deg, cfg.illum_pitch_deg)

    d_row, d_col = np.gradient(heights, field.cell_size_m)
    norm = np.sqrt(d_col**2 + d_row**2 + 1.0)
    yaw = math.radians(cfg.illum_yaw_deg)
    pitch = math.radians(cfg.illum_pitch_deg)
    n_dot_d = (
        -d_col * (math.cos(pitch) * math.cos(yaw))
        - d_row * (math.cos(pitch) * math.sin(yaw))
        + math.sin(pitch)
    ) / norm

    lit = cfg.ambient + (1.0 - cfg.ambient) * np.maximum(0.0, n_dot_d)
    light = np.where(shadow, cfg.shadow_level, lit)
    return _roll_gradient(light, cfg.illum_roll_deg), shadow


def form_image(light: np.ndarray, reflectance: np.ndarray) -> Image:
    """Compose illumination and reflectance rasters into an 8-bit image."""
    light = np.asarray(light, dtype=np.float64)
    reflectance = np.asarray(reflectance, dtype=np.float64)
    if light.shape != reflectance.shape:
        raise ValueError(
            f"light {light.shape} and reflectance {reflectance.shape} shapes differ"
        )
    return Image(round_half_up(255.0 * light * reflectance).astype(np.uint8))


def _support_bbox(support: np.ndarray) -> BoundingBox:
    cols = np.flatnonzero(support.any(axis=0))
    rows = np.flatnonzero(support.any(axis=1))
    if cols.size == 0:
        raise ValueError("object support is empty on the render grid")
    return BoundingBox(int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1]))


def render(cfg: SceneConfig) -> RenderOutput:
    """Render one clean frame (no sensor noise) from a scene config.

    Deterministic: the same config, including its seed, always produces a
    bit-identical frame regardless of process, thread, or call order.
    """
    side = footprint_m(cfg)
    extent = _object_extent_m(cfg)
    if extent > side:
        raise ValueError(
            f"object extent {extent:.3f} m exceeds ground footprint {side:.3f} m"
        )
    field = build_heightfield(cfg)
    _, support = _object_stamp(cfg)
    light, shadow = shadow_and_light(field, cfg)
    img = form_image(light, reflectance_map(cfg))
    return RenderOutput(
        image=img,
        object_bbox=_support_bbox(support),
        shadow_mask=shadow,
        meters_per_pixel=meters_per_pixel(cfg),
    )


def with_seed(cfg: SceneConfig, seed: int) -> SceneConfig:
    """Copy of a config with only the seed replaced."""
    return replace(cfg, seed=seed)
