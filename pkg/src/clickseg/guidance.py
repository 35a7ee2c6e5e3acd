"""User interactions (clicks, strokes) and their raster encodings.

Clicks become either a single signed channel of Gaussian bumps or a pair of
truncated Euclidean distance maps; clamping forces clicked pixels to their
label in a probability map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, ProbabilityMap, _frozen

POSITIVE = "pos"
NEGATIVE = "neg"


@dataclass(frozen=True)
class Click:
    x: int
    y: int
    polarity: str

    def __post_init__(self):
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise ValueError(f"polarity must be '{POSITIVE}' or '{NEGATIVE}'")
        object.__setattr__(self, "x", int(self.x))
        object.__setattr__(self, "y", int(self.y))

    @property
    def sign(self) -> int:
        return 1 if self.polarity == POSITIVE else -1

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "polarity": self.polarity}

    @staticmethod
    def from_json(obj: dict) -> "Click":
        return Click(x=obj["x"], y=obj["y"], polarity=obj["polarity"])


@dataclass(frozen=True)
class Stroke:
    points: tuple[tuple[int, int], ...]
    polarity: str

    def __post_init__(self):
        pts = tuple((int(x), int(y)) for x, y in self.points)
        if len(pts) < 1:
            raise ValueError("stroke needs at least one point")
        if self.polarity not in (POSITIVE, NEGATIVE):
            raise ValueError(f"polarity must be '{POSITIVE}' or '{NEGATIVE}'")
        object.__setattr__(self, "points", pts)

    def to_json(self) -> dict:
        return {"points": [[x, y] for x, y in self.points], "polarity": self.polarity}

    @staticmethod
    def from_json(obj: dict) -> "Stroke":
        return Stroke(points=tuple((p[0], p[1]) for p in obj["points"]),
                      polarity=obj["polarity"])


@dataclass(frozen=True)
class EncodingConfig:
    sigma: float = 10.0          # Gaussian bump std, px
    truncation: float = 255.0    # distance-map cap, px
    clamp_radius: float = 2.0    # hard-constraint disk radius, px

    def __post_init__(self):
        if self.sigma <= 0 or self.truncation <= 0 or self.clamp_radius < 0:
            raise ValueError("sigma > 0, truncation > 0, clamp_radius >= 0 required")

    def to_json(self) -> dict:
        return {"sigma": self.sigma, "truncation": self.truncation,
                "clamp_radius": self.clamp_radius}

    @staticmethod
    def from_json(obj: dict) -> "EncodingConfig":
        return EncodingConfig(**obj)


@dataclass(frozen=True)
class GuidanceMap:
    """Signed click channel, shape (H, W), values in [-1, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"guidance map must be 2-D and nonempty, got {v.shape}")
        if v.min() < -1.0 or v.max() > 1.0:
            raise ValueError("guidance values must lie in [-1, 1]")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


def _check_in_bounds(clicks, width: int, height: int):
    for c in clicks:
        if not (0 <= c.x < width and 0 <= c.y < height):
            raise ValueError(f"click ({c.x}, {c.y}) out of bounds for {width}x{height}")


def encode_gaussian(clicks: list[Click], width: int, height: int,
                    cfg: EncodingConfig = EncodingConfig()) -> GuidanceMap:
    """Sum of +-Gaussian bumps at click positions, clipped to [-1, 1]."""
    _check_in_bounds(clicks, width, height)
    acc = np.zeros((height, width), dtype=np.float64)
    if clicks:
        yy, xx = np.mgrid[0:height, 0:width]
        denom = 2.0 * cfg.sigma * cfg.sigma
        for c in clicks:
            d2 = (xx - c.x) ** 2 + (yy - c.y) ** 2
            acc += c.sign * np.exp(-d2 / denom)
    return GuidanceMap(np.clip(acc, -1.0, 1.0))


def encode_distance_pair(clicks: list[Click], width: int, height: int,
                         cfg: EncodingConfig = EncodingConfig()
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Truncated Euclidean distance to the nearest positive / negative click.

    A channel with no clicks is constant at the truncation value.
    """
    _check_in_bounds(clicks, width, height)
    yy, xx = np.mgrid[0:height, 0:width]
    out = []
    for polarity in (POSITIVE, NEGATIVE):
        sel = [c for c in clicks if c.polarity == polarity]
        if not sel:
            out.append(np.full((height, width), float(cfg.truncation)))
            continue
        d2 = np.full((height, width), np.inf)
        for c in sel:
            d2 = np.minimum(d2, (xx - c.x) ** 2 + (yy - c.y) ** 2)
        out.append(np.minimum(np.sqrt(d2), float(cfg.truncation)))
    return out[0], out[1]


def rasterize_stroke(s: Stroke, spacing: float) -> list[Click]:
    """Resample a polyline at fixed arc-length intervals, first point included.

    The final vertex is emitted when the total length is a whole multiple of
    the spacing (within fp tolerance).
    """
    if spacing <= 0:
        raise ValueError("spacing must be > 0")
    pts = [(float(x), float(y)) for x, y in s.points]
    if len(pts) == 1:
        return [Click(x=round(pts[0][0]), y=round(pts[0][1]), polarity=s.polarity)]

    seg_len = []
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        seg_len.append(math.hypot(x1 - x0, y1 - y0))
    total = sum(seg_len)

    n_samples = int(math.floor(total / spacing + 1e-9)) + 1
    targets = [k * spacing for k in range(n_samples)]

    clicks = []
    seg = 0
    walked = 0.0  # arc length at the start of the current segment
    for t in targets:
        while seg < len(seg_len) - 1 and walked + seg_len[seg] < t - 1e-9:
            walked += seg_len[seg]
            seg += 1
        (x0, y0), (x1, y1) = pts[seg], pts[seg + 1]
        frac = 0.0 if seg_len[seg] == 0 else min(1.0, (t - walked) / seg_len[seg])
        clicks.append(Click(x=round(x0 + frac * (x1 - x0)),
                            y=round(y0 + frac * (y1 - y0)),
                            polarity=s.polarity))
    return clicks


def _disk_bounds(c: Click, radius: float, width: int, height: int):
    r = int(math.floor(radius))
    x0, x1 = max(0, c.x - r), min(width - 1, c.x + r)
    y0, y1 = max(0, c.y - r), min(height - 1, c.y + r)
    return x0, x1, y0, y1


def _paint_disk(arr: np.ndarray, c: Click, radius: float, value) -> None:
    x0, x1, y0, y1 = _disk_bounds(c, radius, arr.shape[1], arr.shape[0])
    yy, xx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    hit = (xx - c.x) ** 2 + (yy - c.y) ** 2 <= radius * radius
    arr[y0 : y1 + 1, x0 : x1 + 1][hit] = value


def clamp_constraints(p: ProbabilityMap, clicks: list[Click],
                      cfg: EncodingConfig = EncodingConfig()) -> ProbabilityMap:
    """Force pixels within clamp_radius of a click to 1.0 / 0.0, later clicks win."""
    _check_in_bounds(clicks, p.width, p.height)
    if not clicks:
        return p
    out = p.values.copy()
    for c in clicks:
        _paint_disk(out, c, cfg.clamp_radius, 1.0 if c.sign > 0 else 0.0)
    return ProbabilityMap(out)


def clamp_mask(m: BinaryMask, clicks: list[Click],
               cfg: EncodingConfig = EncodingConfig()) -> BinaryMask:
    """Same last-click-wins constraint applied to a thresholded mask."""
    if not clicks:
        return m
    _check_in_bounds(clicks, m.width, m.height)
    out = m.labels.copy()
    for c in clicks:
        _paint_disk(out, c, cfg.clamp_radius, c.sign > 0)
    return BinaryMask(out)
