"""Synthetic user interactions: positive, negative and correction clicks.

Distances are true Euclidean pixels, measured with the exact distance
transform, so the margins below are sharp constraints, not approximations.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, distance_transform
from .guidance import NEGATIVE, POSITIVE, Click, Stroke


@dataclass(frozen=True)
class SamplingConfig:
    d_margin: float = 3.0   # keep-away from object boundary
    d_step: float = 5.0     # pairwise click spacing
    d_hull: float = 40.0    # negative-sampling band width around the object
    n_corr_choices: tuple[int, ...] = (0, 1, 2, 3, 4, 5, 10, 20)
    rng_seed: int = 0

    def __post_init__(self):
        if self.d_margin <= 0 or self.d_step <= 0 or self.d_hull <= 0:
            raise ValueError("all distances must be > 0")
        if not self.n_corr_choices:
            raise ValueError("n_corr_choices must be nonempty")


def _coords_of(feasible: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(feasible)
    return np.stack([xs, ys], axis=1)  # (N, 2) as (x, y)


def _greedy_spaced(coords: np.ndarray, n: int, d_step: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Uniform draw over coords, rejecting points closer than d_step to
    an accepted point. Returns fewer than n when the set is exhausted."""
    if len(coords) == 0 or n <= 0:
        return coords[:0]
    order = rng.permutation(len(coords))
    accepted: list[np.ndarray] = []
    min_d2 = d_step * d_step
    for idx in order:
        c = coords[idx]
        if accepted:
            d2 = ((np.asarray(accepted) - c) ** 2).sum(axis=1)
            if d2.min() < min_d2:
                continue
        accepted.append(c)
        if len(accepted) == n:
            break
    return np.asarray(accepted) if accepted else coords[:0]


def _to_clicks(coords: np.ndarray, polarity: str) -> list[Click]:
    return [Click(x=int(x), y=int(y), polarity=polarity) for x, y in coords]


def sample_positive_clicks(gt: BinaryMask, n: int,
                           cfg: SamplingConfig = SamplingConfig()) -> list[Click]:
    """Foreground clicks at least d_margin inside the object, d_step apart."""
    if not gt.labels.any():
        raise ValueError("ground-truth mask is empty")
    dist_to_bg = distance_transform(BinaryMask(~gt.labels))
    feasible = gt.labels & (dist_to_bg >= cfg.d_margin)
    rng = np.random.default_rng(cfg.rng_seed)
    return _to_clicks(_greedy_spaced(_coords_of(feasible), n, cfg.d_step, rng), POSITIVE)


def sample_negative_clicks(gt: BinaryMask, other_objects: list[BinaryMask],
                           n: int, strategy: int,
                           cfg: SamplingConfig = SamplingConfig()) -> list[Click]:
    """The three negative strategies: (1) uniform in a band around the
    object, (2) on other objects, (3) band points maximally spread by
    greedy farthest-point selection."""
    if strategy not in (1, 2, 3):
        raise ValueError(f"strategy must be 1, 2 or 3, got {strategy}")
    background = ~gt.labels
    if not background.any():
        raise ValueError("no background pixels to sample from")
    dist_to_obj = distance_transform(gt)
    rng = np.random.default_rng(cfg.rng_seed)

    if strategy == 2:
        if not other_objects:
            raise ValueError("strategy 2 requires other objects")
        union = np.zeros_like(gt.labels)
        for o in other_objects:
            if o.width != gt.width or o.height != gt.height:
                raise ValueError("other-object mask dimensions must match")
            union |= o.labels
        feasible = union & background & (dist_to_obj >= cfg.d_margin)
        if not feasible.any():
            raise ValueError("no feasible pixels on other objects")
        return _to_clicks(_greedy_spaced(_coords_of(feasible), n, cfg.d_step, rng),
                          NEGATIVE)

    band = background & (dist_to_obj >= cfg.d_margin) & (dist_to_obj <= cfg.d_hull)
    if not band.any():
        raise ValueError("hull band around the object is empty")
    coords = _coords_of(band)

    if strategy == 1:
        return _to_clicks(_greedy_spaced(coords, n, cfg.d_step, rng), NEGATIVE)

    # strategy 3: greedy max-min dispersion over the band
    if n <= 0:
        return []
    first = int(rng.integers(len(coords)))
    chosen = [coords[first]]
    min_d2 = ((coords - coords[first]) ** 2).sum(axis=1).astype(np.float64)
    while len(chosen) < n:
        best = int(np.argmax(min_d2))
        if min_d2[best] < cfg.d_step * cfg.d_step:
            break  # spacing constraint unreachable; stop early
        chosen.append(coords[best])
        min_d2 = np.minimum(min_d2, ((coords - coords[best]) ** 2).sum(axis=1))
    return _to_clicks(np.asarray(chosen), NEGATIVE)


def sample_correction_clicks(pred: BinaryMask, gt: BinaryMask, n: int,
                             cfg: SamplingConfig = SamplingConfig()) -> list[Click]:
    """Clicks inside the error region pred XOR gt: positive on missed
    foreground, negative on false positives, d_step apart."""
    if pred.width != gt.width or pred.height != gt.height:
        raise ValueError("mask dimension mismatch")
    false_neg = gt.labels & ~pred.labels
    false_pos = pred.labels & ~gt.labels
    error = false_neg | false_pos
    if not error.any():
        return []
    rng = np.random.default_rng(cfg.rng_seed)
    coords = _greedy_spaced(_coords_of(error), n, cfg.d_step, rng)
    return [Click(x=int(x), y=int(y),
                  polarity=POSITIVE if false_neg[y, x] else NEGATIVE)
            for x, y in coords]


def _segment_inside(interior: np.ndarray, p0, p1) -> bool:
    # walk the segment at sub-pixel steps; every rounded sample must be interior
    x0, y0 = p0
    x1, y1 = p1
    steps = max(1, int(np.hypot(x1 - x0, y1 - y0) * 2))
    for t in np.linspace(0.0, 1.0, steps + 1):
        x = int(round(x0 + t * (x1 - x0)))
        y = int(round(y0 + t * (y1 - y0)))
        if not interior[y, x]:
            return False
    return True


def simulate_stroke(region: BinaryMask, polarity: str,
                    cfg: SamplingConfig = SamplingConfig()) -> Stroke:
    """Random polyline of 3-10 waypoints strictly inside the region eroded
    by d_margin; straight segments are membership-checked so the whole
    polyline stays inside."""
    dist_to_outside = distance_transform(BinaryMask(~region.labels))
    interior = region.labels & (dist_to_outside >= cfg.d_margin)
    if not interior.any():
        raise ValueError("region has no interior at the required margin")
    rng = np.random.default_rng(cfg.rng_seed)
    coords = _coords_of(interior)
    n_points = int(rng.integers(3, 11))

    start = coords[int(rng.integers(len(coords)))]
    pts = [(int(start[0]), int(start[1]))]
    attempts_per_point = 50
    while len(pts) < n_points:
        placed = False
        for _ in range(attempts_per_point):
            cand = coords[int(rng.integers(len(coords)))]
            cand = (int(cand[0]), int(cand[1]))
            if _segment_inside(interior, pts[-1], cand):
                pts.append(cand)
                placed = True
                break
        if not placed:
            pts.append(pts[-1])  # degenerate fallback for pathological regions
    return Stroke(points=tuple(pts), polarity=polarity)
