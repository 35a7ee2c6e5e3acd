"""Simulated-user click sampling: margins, spacing, hulls, error regions."""
import math

import numpy as np
import pytest

from clickseg.core import BinaryMask, distance_transform
from clickseg.guidance import NEGATIVE, POSITIVE
from clickseg.simulate import (
    SamplingConfig,
    sample_correction_clicks,
    sample_negative_clicks,
    sample_positive_clicks,
    simulate_stroke,
)
from clickseg.synth import blob_mask


def centered_square(size: int, side: int) -> BinaryMask:
    m = np.zeros((size, size), dtype=bool)
    lo = (size - side) // 2
    m[lo:lo + side, lo:lo + side] = True
    return BinaryMask(m)


def min_pairwise(clicks) -> float:
    best = math.inf
    for i, a in enumerate(clicks):
        for b in clicks[i + 1:]:
            best = min(best, math.hypot(a.x - b.x, a.y - b.y))
    return best


def dist_to_object(gt: BinaryMask) -> np.ndarray:
    return distance_transform(gt)


def dist_to_background(gt: BinaryMask) -> np.ndarray:
    return distance_transform(BinaryMask(~gt.labels))


# --- positive clicks -----------------------------------------------------------

def test_positive_single_click_deep_inside():
    gt = centered_square(100, 50)
    cfg = SamplingConfig(rng_seed=0)
    (c,) = sample_positive_clicks(gt, 1, cfg)
    assert gt.labels[c.y, c.x]
    assert dist_to_background(gt)[c.y, c.x] >= cfg.d_margin
    assert c.polarity == POSITIVE


def test_positive_clicks_respect_spacing():
    gt = centered_square(100, 50)
    cfg = SamplingConfig(rng_seed=1)
    clicks = sample_positive_clicks(gt, 5, cfg)
    assert len(clicks) == 5
    assert min_pairwise(clicks) >= cfg.d_step


def test_positive_thin_blob_yields_nothing():
    m = np.zeros((9, 9), dtype=bool)
    m[3:6, 3:6] = True  # 3x3: erosion by the margin empties it
    assert sample_positive_clicks(BinaryMask(m), 3, SamplingConfig()) == []


def test_positive_empty_mask_is_an_error():
    with pytest.raises(ValueError):
        sample_positive_clicks(BinaryMask.empty(5, 5), 1, SamplingConfig())


def test_positive_deterministic_per_seed():
    gt = blob_mask(seed=3, height=64, width=64)
    a = sample_positive_clicks(gt, 6, SamplingConfig(rng_seed=7))
    b = sample_positive_clicks(gt, 6, SamplingConfig(rng_seed=7))
    c = sample_positive_clicks(gt, 6, SamplingConfig(rng_seed=8))
    assert a == b
    assert a != c


# --- negative clicks --------------------------------------------------------------

def test_negative_strategy1_stays_in_hull_band():
    gt = centered_square(100, 30)
    cfg = SamplingConfig(rng_seed=2)
    clicks = sample_negative_clicks(gt, [], 8, 1, cfg)
    d = dist_to_object(gt)
    assert len(clicks) == 8
    for c in clicks:
        assert not gt.labels[c.y, c.x]
        assert cfg.d_margin <= d[c.y, c.x] <= cfg.d_hull
        assert c.polarity == NEGATIVE
    assert min_pairwise(clicks) >= cfg.d_step


def test_negative_strategy2_lands_on_other_objects():
    gt = centered_square(100, 20)
    other = np.zeros((100, 100), dtype=bool)
    other[5:25, 70:95] = True
    cfg = SamplingConfig(rng_seed=3)
    clicks = sample_negative_clicks(gt, [BinaryMask(other)], 5, 2, cfg)
    d = dist_to_object(gt)
    assert clicks
    for c in clicks:
        assert other[c.y, c.x]
        assert d[c.y, c.x] >= cfg.d_margin


def test_negative_strategy2_requires_other_objects():
    gt = centered_square(40, 10)
    with pytest.raises(ValueError):
        sample_negative_clicks(gt, [], 3, 2, SamplingConfig())


def test_negative_strategy3_disperses_better_than_random():
    gt = centered_square(120, 40)
    spread = min_pairwise(
        sample_negative_clicks(gt, [], 4, 3, SamplingConfig(rng_seed=0)))
    for seed in range(100):
        random_draw = sample_negative_clicks(
            gt, [], 4, 1, SamplingConfig(rng_seed=seed))
        assert spread >= min_pairwise(random_draw)


def test_negative_infeasible_band_is_an_error():
    # Object filling the frame leaves no background band to sample from.
    gt = BinaryMask(np.ones((20, 20), dtype=bool))
    with pytest.raises(ValueError):
        sample_negative_clicks(gt, [], 2, 1, SamplingConfig())


def test_negative_unknown_strategy_rejected():
    gt = centered_square(40, 10)
    with pytest.raises(ValueError):
        sample_negative_clicks(gt, [], 2, 4, SamplingConfig())


# --- correction clicks ----------------------------------------------------------

def test_correction_identical_masks_yield_nothing():
    gt = centered_square(30, 10)
    assert sample_correction_clicks(gt, gt, 4, SamplingConfig()) == []


def test_correction_false_positive_patch_gets_negatives():
    gt = centered_square(60, 20)
    pred = gt.labels.copy()
    pred[5:15, 40:50] = True  # spurious 10x10 patch
    clicks = sample_correction_clicks(BinaryMask(pred), gt, 6,
                                      SamplingConfig(rng_seed=4))
    assert clicks
    for c in clicks:
        assert c.polarity == NEGATIVE
        assert 40 <= c.x < 50 and 5 <= c.y < 15


def test_correction_missing_half_gets_positives_there():
    gt = centered_square(60, 24)
    pred = gt.labels.copy()
    pred[:, :30] = False  # left half of the object goes missing
    clicks = sample_correction_clicks(BinaryMask(pred), gt, 6,
                                      SamplingConfig(rng_seed=5))
    err = gt.labels & ~pred
    assert clicks
    for c in clicks:
        assert c.polarity == POSITIVE
        assert err[c.y, c.x]
    assert min_pairwise(clicks) >= SamplingConfig().d_step


def test_correction_polarity_tracks_error_type():
    gt = centered_square(60, 20)
    pred = gt.labels.copy()
    pred[10:20, 10:20] = True            # false positives
    pred[25:30, 25:30] = False           # false negatives
    clicks = sample_correction_clicks(BinaryMask(pred), gt, 10,
                                      SamplingConfig(rng_seed=6))
    fn = gt.labels & ~pred
    fp = pred & ~gt.labels
    assert clicks
    for c in clicks:
        if c.polarity == POSITIVE:
            assert fn[c.y, c.x]
        else:
            assert fp[c.y, c.x]


# --- strokes ----------------------------------------------------------------

def test_stroke_stays_inside_eroded_region():
    region = centered_square(80, 50)
    cfg = SamplingConfig(rng_seed=0)
    eroded = dist_to_background(region) >= cfg.d_margin
    s = simulate_stroke(region, POSITIVE, cfg)
    assert 3 <= len(s.points) <= 10
    assert s.polarity == POSITIVE
    for x, y in s.points:
        assert eroded[y, x]


def test_stroke_deterministic_per_seed():
    region = centered_square(80, 50)
    a = simulate_stroke(region, NEGATIVE, SamplingConfig(rng_seed=9))
    b = simulate_stroke(region, NEGATIVE, SamplingConfig(rng_seed=9))
    assert a == b


def test_stroke_thousand_seeds_never_leave_disk():
    yy, xx = np.mgrid[0:70, 0:70]
    disk = BinaryMask((xx - 35) ** 2 + (yy - 35) ** 2 <= 28 ** 2)
    inside = disk.labels
    for seed in range(1000):
        s = simulate_stroke(disk, POSITIVE, SamplingConfig(rng_seed=seed))
        for x, y in s.points:
            assert inside[y, x]


def test_stroke_without_interior_is_an_error():
    m = np.zeros((8, 8), dtype=bool)
    m[3, :] = True  # a 1-px line has no interior at the margin
    with pytest.raises(ValueError):
        simulate_stroke(BinaryMask(m), POSITIVE, SamplingConfig())
