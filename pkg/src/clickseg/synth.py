"""Synthetic scenes, masks, and sequences for benchmarks and demos.

Everything here is a pure function of an integer seed, so datasets and
experiment suites are reproducible byte-for-byte.
"""
from __future__ import annotations

import os

import numpy as np

from .core import (
    BinaryMask,
    Image,
    ProbabilityMap,
    distance_transform,
    iou,
    save_bytes,
    write_pgm_mask,
    write_ppm,
)

__all__ = [
    "blob_mask",
    "two_tone_scene",
    "textured_scene",
    "scattered_scene",
    "camo_scene",
    "degrade_mask",
    "translating_sequence",
    "crf_instance",
    "write_instance_dir",
    "write_sequence_dir",
]


def _ellipse(height: int, width: int, cx: float, cy: float, rx: float,
             ry: float, angle: float) -> np.ndarray:
    yy, xx = np.mgrid[0:height, 0:width]
    dx, dy = xx - cx, yy - cy
    u = dx * np.cos(angle) + dy * np.sin(angle)
    v = -dx * np.sin(angle) + dy * np.cos(angle)
    return (u / rx) ** 2 + (v / ry) ** 2 <= 1.0


def blob_mask(seed: int, height: int = 48, width: int = 48,
              min_radius_frac: float = 0.15,
              max_radius_frac: float = 0.3) -> BinaryMask:
    """Random rotated ellipse, never empty."""
    rng = np.random.default_rng(seed)
    cx = rng.uniform(0.3 * width, 0.7 * width)
    cy = rng.uniform(0.3 * height, 0.7 * height)
    rx = max(2.0, rng.uniform(min_radius_frac, max_radius_frac) * width)
    ry = max(2.0, rng.uniform(min_radius_frac, max_radius_frac) * height)
    angle = rng.uniform(0.0, np.pi)
    return BinaryMask(_ellipse(height, width, cx, cy, rx, ry, angle))


def _distinct_palette(rng: np.random.Generator, gap: float = 120.0):
    fg = rng.uniform(60.0, 190.0, 3)
    bg = rng.uniform(60.0, 190.0, 3)
    while np.abs(fg - bg).sum() < gap:
        bg = rng.uniform(60.0, 190.0, 3)
    return fg, bg


def _to_image(arr: np.ndarray) -> Image:
    return Image(np.clip(np.rint(arr), 0, 255).astype(np.uint8))


def two_tone_scene(seed: int, height: int = 48, width: int = 48,
                   noise: float = 0.0) -> tuple[Image, BinaryMask]:
    """One uniform-color object on a distinct uniform background."""
    rng = np.random.default_rng(seed)
    mask = blob_mask(seed, height, width)
    fg, bg = _distinct_palette(rng)
    arr = np.where(mask.labels[..., None], fg, bg)
    if noise > 0:
        arr = arr + rng.normal(0.0, noise, arr.shape)
    return _to_image(arr), mask


def textured_scene(seed: int, height: int = 48, width: int = 48,
                   overlap: float = 0.5,
                   noise: float = 6.0) -> tuple[Image, BinaryMask]:
    """Checker-textured object and background with partially shared tones.

    Each region mixes two tones on a randomized 3x3-cell checker; `overlap`
    in [0, 1] moves one background tone toward one foreground tone, making
    pure color statistics increasingly ambiguous.
    """
    rng = np.random.default_rng(seed)
    mask = blob_mask(seed, height, width)
    fg, bg = _distinct_palette(rng)
    fg2 = np.clip(fg + rng.uniform(-40, 40, 3), 0, 255)
    bg2 = np.clip(bg + rng.uniform(-40, 40, 3), 0, 255)
    bg2 = bg2 + overlap * (fg2 - bg2)  # shared tone between the regions
    cells = rng.random((height // 3 + 1, width // 3 + 1)) < 0.5
    checker = np.kron(cells, np.ones((3, 3), dtype=bool))[:height, :width]
    fg_tex = np.where(checker[..., None], fg, fg2)
    bg_tex = np.where(checker[..., None], bg, bg2)
    arr = np.where(mask.labels[..., None], fg_tex, bg_tex)
    arr = arr + rng.normal(0.0, noise, arr.shape)
    return _to_image(arr), mask


def scattered_scene(seed: int, height: int = 56, width: int = 56,
                    noise: float = 5.0) -> tuple[Image, BinaryMask]:
    """Object made of several small blobs spread across the image.

    One blob sits in each image quadrant, all sharing one tone on a
    distinct background. The object's bounding box therefore spans nearly
    the whole frame even though the object itself covers little of it:
    any method that seeds its color models from a box around the mask
    mixes mostly background into the foreground sample, while a method
    that samples only around clicks sees pure object pixels.
    """
    rng = np.random.default_rng(seed)
    fg, bg = _distinct_palette(rng)
    labels = np.zeros((height, width), dtype=bool)
    for qy in (0.27, 0.73):
        for qx in (0.27, 0.73):
            cx = qx * width + rng.uniform(-4.0, 4.0)
            cy = qy * height + rng.uniform(-4.0, 4.0)
            rx = rng.uniform(4.5, 7.0)
            ry = rng.uniform(4.5, 7.0)
            angle = rng.uniform(0.0, np.pi)
            labels |= _ellipse(height, width, cx, cy, rx, ry, angle)
    arr = np.where(labels[..., None], fg, bg)
    arr = arr + rng.normal(0.0, noise, arr.shape)
    return _to_image(arr), BinaryMask(labels)


def _translate(labels: np.ndarray, dx: int, dy: int) -> np.ndarray:
    h, w = labels.shape
    out = np.zeros_like(labels)
    ys = slice(max(0, dy), min(h, h + dy))
    xs = slice(max(0, dx), min(w, w + dx))
    ys_src = slice(max(0, -dy), min(h, h - dy))
    xs_src = slice(max(0, -dx), min(w, w - dx))
    out[ys, xs] = labels[ys_src, xs_src]
    return out


def _apply_degradation(mask: BinaryMask, op: str, magnitude: float,
                       direction: np.ndarray) -> BinaryMask:
    labels = mask.labels
    if op in ("translate", "translate_dilate"):
        dx = int(round(direction[0] * magnitude))
        dy = int(round(direction[1] * magnitude))
        labels = _translate(labels, dx, dy)
    if op == "dilate" or (op == "translate_dilate" and magnitude >= 2):
        r = magnitude if op == "dilate" else magnitude / 2.0
        labels = distance_transform(BinaryMask(labels)) <= r
    if op == "erode":
        inner = distance_transform(BinaryMask(~labels))
        labels = inner > magnitude
    return BinaryMask(labels)


def degrade_mask(mask: BinaryMask, seed: int, target_iou: float = 0.5,
                 op: str | None = None) -> BinaryMask:
    """Corrupt a mask by translation/dilation/erosion to roughly target IOU.

    Picks a random corruption style (or the given `op`), then searches the
    magnitude whose result is closest to `target_iou` against the original.
    """
    rng = np.random.default_rng(seed)
    if op is None:
        op = rng.choice(["translate", "dilate", "erode", "translate_dilate"])
    theta = rng.uniform(0.0, 2.0 * np.pi)
    direction = np.array([np.cos(theta), np.sin(theta)])
    best, best_gap = mask, abs(1.0 - target_iou)
    for magnitude in np.arange(1.0, 40.0, 0.5):
        cand = _apply_degradation(mask, str(op), float(magnitude), direction)
        gap = abs(iou(cand, mask) - target_iou)
        if gap < best_gap:
            best, best_gap = cand, gap
        if iou(cand, mask) < target_iou - 0.2:
            break
    return best


CAMO_OBJECT_TONE = np.array([150.0, 60.0, 60.0])
CAMO_BG_TONE = np.array([60.0, 150.0, 160.0])
# Equidistant from both region tones, so color likelihoods genuinely tie
# on camouflage pixels instead of one model winning in the tails.
CAMO_SHARED_TONE = np.array([165.0, 165.0, 110.0])


def camo_scene(seed: int, height: int = 56, width: int = 56,
               n_straddle: int = 4, noise: float = 5.0
               ) -> tuple[Image, BinaryMask]:
    """Object whose boundary is partially camouflaged.

    The object body is a fine two-tone grain (object tone + shared tone)
    and the background is a third tone — except for shared-tone patches
    that straddle the object boundary and a couple more on the image
    border. Color statistics alone cannot decide which side of the
    boundary a camouflage pixel belongs to; spatial context and any mask
    prior carry the remaining information.
    """
    rng = np.random.default_rng(seed)
    mask = blob_mask(seed, height, width, min_radius_frac=0.22,
                     max_radius_frac=0.32)
    labels = mask.labels

    grain_cells = rng.random((height // 3 + 1, width // 3 + 1)) < 0.35
    grain = np.kron(grain_cells, np.ones((3, 3), dtype=bool))[:height, :width]
    arr = np.where(labels[..., None],
                   np.where(grain[..., None], CAMO_SHARED_TONE,
                            CAMO_OBJECT_TONE),
                   CAMO_BG_TONE)

    inner = distance_transform(BinaryMask(~labels))
    edge = np.argwhere(labels & (inner <= 1.5))
    yy, xx = np.mgrid[0:height, 0:width]
    order = rng.permutation(len(edge))
    centers: list[np.ndarray] = []
    for idx in order:
        cand = edge[idx]
        if all(np.hypot(*(cand - c)) >= 12.0 for c in centers):
            centers.append(cand)
        if len(centers) == n_straddle:
            break
    for cy, cx in centers:
        r = rng.uniform(3.5, 5.5)
        patch = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        arr = np.where(patch[..., None], CAMO_SHARED_TONE, arr)

    for _ in range(2):
        side = rng.integers(0, 4)
        r = rng.uniform(4.0, 6.0)
        if side == 0:
            cy, cx = 0, rng.uniform(5, width - 5)
        elif side == 1:
            cy, cx = height - 1, rng.uniform(5, width - 5)
        elif side == 2:
            cy, cx = rng.uniform(5, height - 5), 0
        else:
            cy, cx = rng.uniform(5, height - 5), width - 1
        patch = ((yy - cy) ** 2 + (xx - cx) ** 2 <= r * r) & ~labels
        arr = np.where(patch[..., None], CAMO_SHARED_TONE, arr)

    arr = arr + rng.normal(0.0, noise, arr.shape)
    return _to_image(arr), mask


def translating_sequence(seed: int, n_frames: int = 20, height: int = 48,
                         width: int = 48, speed: float = 2.0,
                         noise: float = 4.0, palette_gap: float | None = None,
                         radius_frac: float = 0.18
                         ) -> tuple[list[Image], list[BinaryMask]]:
    """An object translating `speed` px/frame on a plain background.

    The path is chosen so the object stays fully visible; ground truth is
    the stamped shape at each integer offset. By default the object and
    background tones are well separated; `palette_gap` instead fixes their
    total channel difference, so small gaps make color evidence weak and
    the temporal prior load-bearing (motion then genuinely costs accuracy).
    """
    rng = np.random.default_rng(seed)
    rx = max(3.0, radius_frac * width)
    ry = max(3.0, radius_frac * height)
    angle = rng.uniform(0.0, np.pi)
    shape = _ellipse(height, width, (width - 1) / 2.0, (height - 1) / 2.0,
                     rx, ry, angle)
    if palette_gap is None:
        fg, bg = _distinct_palette(rng)
    else:
        base = rng.uniform(80.0, 170.0, 3)
        d = rng.normal(size=3)
        d /= np.abs(d).sum()
        fg = np.clip(base + d * palette_gap / 2.0, 0, 255)
        bg = np.clip(base - d * palette_gap / 2.0, 0, 255)

    travel = speed * (n_frames - 1)
    theta = rng.uniform(0.0, 2.0 * np.pi)
    v = np.array([np.cos(theta), np.sin(theta)])
    margin_x = width / 2.0 - rx - 2.0
    margin_y = height / 2.0 - ry - 2.0
    scale = min(1.0,
                margin_x / max(abs(v[0]) * travel / 2.0, 1e-9),
                margin_y / max(abs(v[1]) * travel / 2.0, 1e-9))
    v = v * scale
    start = -v * travel / 2.0

    frames, gts = [], []
    for t in range(n_frames):
        off = start + v * speed * t
        labels = _translate(shape, int(round(off[0])), int(round(off[1])))
        arr = np.where(labels[..., None], fg, bg)
        arr = arr + rng.normal(0.0, noise, arr.shape)
        frames.append(_to_image(arr))
        gts.append(BinaryMask(labels))
    return frames, gts


def crf_instance(seed: int, height: int = 48,
                 width: int = 48) -> tuple[Image, ProbabilityMap]:
    """A structured scene plus a noisy-but-confident probability map.

    The map marks the object at 0.9 and background at 0.1, then pulls a
    random 30% of pixels part-way toward 0.5 — the shape of outputs a real
    per-pixel predictor produces.
    """
    rng = np.random.default_rng(seed)
    mask = blob_mask(seed, height, width)
    fg, bg = _distinct_palette(rng)
    arr = np.where(mask.labels[..., None], fg, bg)
    arr = arr + rng.normal(0.0, 8.0, arr.shape)
    p = np.where(mask.labels, 0.9, 0.1)
    weak = rng.random((height, width)) < 0.3
    p = np.where(weak, 0.5 + (p - 0.5) * rng.uniform(0.0, 0.5, (height, width)), p)
    return _to_image(arr), ProbabilityMap(p)


def write_instance_dir(root: str, instance_id: str, img: Image,
                       gt: BinaryMask) -> str:
    """Write `<root>/<id>/image.ppm` and `gt.pgm`; returns the directory."""
    d = os.path.join(root, instance_id)
    os.makedirs(d, exist_ok=True)
    save_bytes(os.path.join(d, "image.ppm"), write_ppm(img))
    save_bytes(os.path.join(d, "gt.pgm"), write_pgm_mask(gt))
    return d


def write_sequence_dir(root: str, seq_id: str, frames: list[Image],
                       gts: list[BinaryMask] | None = None) -> str:
    """Write `<root>/<id>/frames/%04d.ppm` (+ `gts/%04d.pgm`)."""
    d = os.path.join(root, seq_id)
    os.makedirs(os.path.join(d, "frames"), exist_ok=True)
    for t, frame in enumerate(frames):
        save_bytes(os.path.join(d, "frames", "%04d.ppm" % t), write_ppm(frame))
    if gts is not None:
        os.makedirs(os.path.join(d, "gts"), exist_ok=True)
        for t, gt in enumerate(gts):
            save_bytes(os.path.join(d, "gts", "%04d.pgm" % t), write_pgm_mask(gt))
    return d
