"""Binary dense-CRF refinement via parallel mean-field inference.

Energy: E(x) = sum_i -log P(x_i) + sum_{i<j} mu(x_i, x_j) * k(f_i, f_j),
with Potts compatibility mu (1 iff labels differ) and a two-kernel Gaussian
k: an appearance kernel over (position, color) and a smoothness kernel over
position alone. Two inference paths compute the same update:

- `mean_field_reference`: exact dense pairwise sums, O(N^2), small images
  only. Each pixel's contributions are folded with their left-right mirror
  partner before reducing, which makes the floating-point summation order
  mirror-invariant: a mirrored input yields bit-identical mirrored
  marginals.
- `mean_field_fast`: separable truncated convolution for the smoothness
  kernel plus a 5-D bilateral grid (splat / blur / slice) for appearance.
  The grid blur is an exact dense Gaussian matrix product per axis, so the
  only approximation is the quadratic B-spline splat/slice quantization;
  cell sizes are chosen so several cells span one kernel std, and both
  blur variance and zero-offset amplitude are calibrated in closed form
  against the spline-pair convolution, leaving sub-percent shape error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.special import expit

from .core import BinaryMask, Image, ProbabilityMap, _check_same_dims, _frozen

UNARY_EPS = 1e-6
REFERENCE_MAX_PIXELS = 64 * 64


@dataclass(frozen=True)
class CrfParams:
    w_app: float = 10.0       # appearance kernel weight
    theta_alpha: float = 80.0  # appearance spatial std, px
    theta_beta: float = 13.0   # appearance color std, intensity units
    w_smooth: float = 3.0      # smoothness kernel weight
    theta_gamma: float = 3.0   # smoothness spatial std, px
    iterations: int = 5

    def __post_init__(self):
        if self.theta_alpha <= 0 or self.theta_beta <= 0 or self.theta_gamma <= 0:
            raise ValueError("kernel stds must be > 0")
        if self.w_app < 0 or self.w_smooth < 0:
            raise ValueError("kernel weights must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    def to_json(self) -> dict:
        return {"w_app": self.w_app, "theta_alpha": self.theta_alpha,
                "theta_beta": self.theta_beta, "w_smooth": self.w_smooth,
                "theta_gamma": self.theta_gamma, "iterations": self.iterations}

    @staticmethod
    def from_json(obj: dict) -> "CrfParams":
        return CrfParams(**obj)


@dataclass(frozen=True)
class Marginals:
    """Per-pixel foreground probability after mean-field inference."""

    q: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.q, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"marginals must be 2-D and nonempty, got {v.shape}")
        if np.isnan(v).any() or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("marginals must lie in [0, 1]")
        object.__setattr__(self, "q", _frozen(v))

    @property
    def height(self) -> int:
        return self.q.shape[0]

    @property
    def width(self) -> int:
        return self.q.shape[1]

    def threshold(self) -> BinaryMask:
        """Binarize at 0.5; the tie goes to foreground."""
        return BinaryMask(self.q >= 0.5)


def _clipped(p: ProbabilityMap) -> np.ndarray:
    return np.clip(p.values, UNARY_EPS, 1.0 - UNARY_EPS)


def _features(img: Image):
    h, w = img.height, img.width
    yy, xx = np.mgrid[0:h, 0:w]
    pos = np.stack([xx.ravel(), yy.ravel()], axis=1).astype(np.float64)
    col = img.pixels.reshape(-1, 3).astype(np.float64)
    return pos, col


def _kernel_matrix(img: Image, params: CrfParams) -> np.ndarray:
    """Dense pairwise kernel K_ij, diagonal zeroed."""
    pos, col = _features(img)
    d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2)
    k = np.zeros_like(d2)
    if params.w_app > 0:
        c2 = ((col[:, None, :] - col[None, :, :]) ** 2).sum(axis=2)
        k += params.w_app * np.exp(
            -d2 / (2.0 * params.theta_alpha**2) - c2 / (2.0 * params.theta_beta**2))
    if params.w_smooth > 0:
        k += params.w_smooth * np.exp(-d2 / (2.0 * params.theta_gamma**2))
    np.fill_diagonal(k, 0.0)
    return k


def energy(mask: BinaryMask, p: ProbabilityMap, img: Image,
           params: CrfParams = CrfParams()) -> float:
    """Exact labeling energy: unary -log P plus Potts pairwise over all
    unordered pixel pairs. O(N^2); intended for small instances."""
    _check_same_dims(mask, p, "mask/probabilities")
    _check_same_dims(mask, img, "mask/image")
    ph = _clipped(p)
    unary = float(np.where(mask.labels, -np.log(ph), -np.log(1.0 - ph)).sum())
    if params.w_app == 0 and params.w_smooth == 0:
        return unary
    fg = mask.labels.ravel()
    if fg.all() or not fg.any():
        return unary  # uniform labeling: Potts term vanishes
    k = _kernel_matrix(img, params)
    # sum over disagreeing unordered pairs = fg^T K bg (diagonal is fg&bg=0)
    pairwise = float(k[fg][:, ~fg].sum())
    return unary + pairwise


def _fold_mirror_sum(rows: np.ndarray, height: int, width: int) -> np.ndarray:
    """Row sums with a summation order that is invariant under left-right
    mirroring: each column is first added to its mirror partner (a
    commutative 2-sum), then the symmetric half is reduced."""
    p3 = rows.reshape(rows.shape[0], height, width)
    half = width // 2
    folded = p3[:, :, :half] + p3[:, :, width - 1 : width - 1 - half : -1]
    out = folded.reshape(rows.shape[0], -1).sum(axis=1)
    if width % 2 == 1:
        out = out + p3[:, :, half].sum(axis=1)
    return out


def mean_field_reference(p: ProbabilityMap, img: Image,
                         params: CrfParams = CrfParams()) -> Marginals:
    """Exact dense mean-field: parallel updates with O(N^2) pairwise sums."""
    _check_same_dims(p, img, "probabilities/image")
    if img.width * img.height > REFERENCE_MAX_PIXELS:
        raise ValueError(
            f"reference path is limited to {REFERENCE_MAX_PIXELS} pixels "
            f"(64x64); got {img.width}x{img.height}")
    ph = _clipped(p)
    if params.w_app == 0 and params.w_smooth == 0:
        return Marginals(ph)  # unary identity, exact
    h, w = ph.shape
    k = _kernel_matrix(img, params)
    rowsums = _fold_mirror_sum(k, h, w)
    log_fg = np.log(ph).ravel()
    log_bg = np.log(1.0 - ph).ravel()
    q = ph.ravel()
    for _ in range(params.iterations):
        s_fg = _fold_mirror_sum(k * q[None, :], h, w)  # sum_j K_ij q_j
        s_bg = rowsums - s_fg
        a_fg = log_fg - s_bg  # foreground pays disagreement with bg mass
        a_bg = log_bg - s_fg
        m = np.maximum(a_fg, a_bg)
        e_fg = np.exp(a_fg - m)
        e_bg = np.exp(a_bg - m)
        q = e_fg / (e_fg + e_bg)
    return Marginals(q.reshape(h, w))


# ---------------------------------------------------------------------------
# Fast path: separable smoothness convolution + 5-D bilateral grid.

class _SpatialFilter:
    """Truncated separable Gaussian over the pixel lattice (zero boundary),
    matching the exact smoothness sums up to the tail beyond 4.5 stds."""

    def __init__(self, sigma: float):
        radius = int(math.ceil(4.5 * sigma))
        t = np.arange(-radius, radius + 1, dtype=np.float64)
        self.taps = np.exp(-(t**2) / (2.0 * sigma * sigma))

    def __call__(self, values: np.ndarray) -> np.ndarray:
        tmp = ndimage.correlate1d(values, self.taps, axis=0, mode="constant", cval=0.0)
        return ndimage.correlate1d(tmp, self.taps, axis=1, mode="constant", cval=0.0)


def _bspline2(t: np.ndarray) -> np.ndarray:
    """Quadratic B-spline, support (-1.5, 1.5)."""
    at = np.abs(t)
    return np.where(at <= 0.5, 0.75 - at * at,
                    np.where(at < 1.5, 0.5 * (1.5 - at) ** 2, 0.0))


class _BilateralGrid:
    """Unnormalized Gaussian filtering in (x, y, r, g, b) feature space.

    Quadratic B-spline splat onto a regular 5-D lattice, dense Gaussian
    blur per axis, B-spline slice. The spline window adds variance 1/4
    (grid units) on each end, so the blur uses v^2 = s^2 - 1/2 where s is
    the kernel std in cells; the amplitude is rescaled so the composite
    kernel (spline pair convolution = quintic B-spline B5, then lattice
    Gaussian) equals 1 at zero offset:
        k(0) = B5(0) + 2 B5(1) e^{-1/(2v^2)} + 2 B5(2) e^{-2/v^2}
    with B5(0) = 11/20, B5(1) = 13/60, B5(2) = 1/120. Unlike a multilinear
    splat, the quadratic window leaves no percent-level phase wobble.

    The spatial axes are anchored at the image center and the color axes at
    each channel's mid-range, so the lattice is symmetric under left-right
    mirroring and mirrored inputs see identical quantization error.
    """

    MAX_CELLS = 20_000_000

    def __init__(self, img: Image, theta_alpha: float, theta_beta: float,
                 cells_per_std_spatial: float = 5.0,
                 cells_per_std_color: float = 2.0):
        from scipy import sparse

        h, w = img.height, img.width
        pos, col = _features(img)
        feats = np.concatenate([pos, col], axis=1)  # (N, 5)
        centers = np.array([(w - 1) / 2.0, (h - 1) / 2.0, 0, 0, 0])
        centers[2:] = (col.min(axis=0) + col.max(axis=0)) / 2.0
        sigmas = np.array([theta_alpha, theta_alpha,
                           theta_beta, theta_beta, theta_beta])
        target_s = np.array([cells_per_std_spatial] * 2 + [cells_per_std_color] * 3)

        while True:
            cells = sigmas / target_s
            phi = (feats - centers) / cells  # grid coordinates
            base = np.floor(phi + 0.5).astype(np.int64)  # nearest node
            lo = base.min(axis=0) - 2
            hi = base.max(axis=0) + 2
            sizes = hi - lo + 1
            if sizes.prod() <= self.MAX_CELLS:
                break
            target_s = target_s / 1.3  # coarsen uniformly until it fits

        base = base - lo[None, :]
        t = phi - (base + lo[None, :])  # in [-0.5, 0.5)
        strides = np.ones(5, dtype=np.int64)
        for d in range(3, -1, -1):
            strides[d] = strides[d + 1] * sizes[d + 1]

        n = feats.shape[0]
        n_cells = int(sizes.prod())
        taps = np.stack([_bspline2(t - o) for o in (-1.0, 0.0, 1.0)])  # (3, N, 5)
        idx = np.zeros((243, n), dtype=np.int64)
        wts = np.ones((243, n), dtype=np.float64)
        for corner in range(243):
            c = corner
            for d in range(5):
                o = c % 3
                c //= 3
                idx[corner] += (base[:, d] + o - 1) * strides[d]
                wts[corner] = wts[corner] * taps[o, :, d]
        self.splat = sparse.csr_matrix(
            (wts.ravel(), (idx.ravel(), np.tile(np.arange(n), 243))),
            shape=(n_cells, n))
        self.slice = self.splat.T.tocsr()

        self.shape = (h, w)
        self.sizes = tuple(int(x) for x in sizes)
        self.blur = []
        alpha = 1.0
        for d in range(5):
            s = sigmas[d] / cells[d]
            v2 = max(s * s - 0.5, 0.05)
            a = np.arange(sizes[d], dtype=np.float64)
            self.blur.append(np.exp(-((a[:, None] - a[None, :]) ** 2) / (2.0 * v2)))
            k0 = (11.0 / 20.0 + 2.0 * (13.0 / 60.0) * math.exp(-1.0 / (2.0 * v2))
                  + 2.0 * (1.0 / 120.0) * math.exp(-2.0 / v2))
            alpha /= k0
        self.alpha = alpha

    def __call__(self, values: np.ndarray) -> np.ndarray:
        grid = (self.splat @ values.ravel()).reshape(self.sizes)
        for d in range(5):
            grid = np.moveaxis(
                np.tensordot(self.blur[d], np.moveaxis(grid, d, 0), axes=([1], [0])),
                0, d)
        return self.alpha * (self.slice @ grid.ravel()).reshape(self.shape)


def mean_field_fast(p: ProbabilityMap, img: Image,
                    params: CrfParams = CrfParams()) -> Marginals:
    """Filtered mean-field: identical update rule to the reference path,
    with pairwise sums computed by Gaussian filtering."""
    _check_same_dims(p, img, "probabilities/image")
    ph = _clipped(p)
    if params.w_app == 0 and params.w_smooth == 0:
        return Marginals(ph)
    logit_u = np.log(ph) - np.log(1.0 - ph)
    smooth = _SpatialFilter(params.theta_gamma) if params.w_smooth > 0 else None
    grid = (_BilateralGrid(img, params.theta_alpha, params.theta_beta)
            if params.w_app > 0 else None)
    q = ph
    for _ in range(params.iterations):
        s = 2.0 * q - 1.0
        msg = np.zeros_like(s)
        if grid is not None:
            msg += params.w_app * (grid(s) - s)  # subtract the self term k(0)=1
        if smooth is not None:
            msg += params.w_smooth * (smooth(s) - s)
        q = expit(logit_u + msg)
    return Marginals(q)


def crf_refine(p: ProbabilityMap, img: Image,
               params: CrfParams = CrfParams()) -> BinaryMask:
    """Threshold the fast-path marginals at 0.5 (ties to foreground)."""
    return mean_field_fast(p, img, params).threshold()
