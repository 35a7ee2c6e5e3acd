"""Pluggable per-pixel foreground-probability backends.

Every backend maps (image, guidance, prior mask, clicks) to a probability
map of the same dimensions. Three kinds ship:

- `oracle`: derives the map from a stored ground-truth mask, optionally
  blurred and noised — a deterministic stand-in for a learned model, used
  by tests and demos.
- `color_model`: click-seeded GMM color likelihoods blended with the
  guidance map and the prior mask in logit space.
- `grabcut_adapter`: a soft map around a full GrabCut segmentation.

The module also carries the first-frame appearance model and sequential
mask propagation for video.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.special import expit, logit

from .core import (
    BinaryMask,
    Image,
    ProbabilityMap,
    rle_decode,
    rle_from_json,
)
from .crf import CrfParams, crf_refine
from .graphcut import BoxPrior, fit_gmm, grabcut_segment, heuristic_box
from .guidance import NEGATIVE, POSITIVE, Click, GuidanceMap

__all__ = [
    "BackendSpec",
    "PredictRequest",
    "AppearanceModel",
    "predict",
    "oracle_predict",
    "fit_first_frame_model",
    "propagate_sequence",
]

BACKEND_KINDS = ("oracle", "color_model", "grabcut_adapter")

DEFAULT_LAMBDA_GUIDANCE = 2.0
DEFAULT_LAMBDA_MASK = 1.0
CLICK_SAMPLE_RADIUS = 4.0
# Color evidence is calibrated to at most this many logits per pixel.
# GMMs fit on a handful of click-disk pixels produce likelihood ratios in
# the tens, which would drown the guidance and prior-mask terms; bounding
# the ratio below the guidance weight keeps the trust hierarchy of an
# interactive engine: explicit user clicks outrank color statistics, the
# same way a trained network defers to its click channels.
LLR_CLIP = 1.5


@dataclass(frozen=True)
class BackendSpec:
    """Which probability backend to run, plus its parameters (JSON-safe)."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError("unknown backend kind %r (expected one of %s)"
                             % (self.kind, ", ".join(BACKEND_KINDS)))
        if not isinstance(self.params, dict):
            raise ValueError("backend params must be a dict")

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @staticmethod
    def from_json(obj: dict) -> "BackendSpec":
        return BackendSpec(str(obj["kind"]), dict(obj.get("params", {})))


@dataclass(frozen=True)
class PredictRequest:
    """One prediction call: image plus optional guidance/prior/clicks.

    `guidance` is a GuidanceMap or a (pos_dist, neg_dist) pair of truncated
    distance rasters; the pair is reduced to a signed signal in [-1, 1].
    """

    image: Image
    guidance: object = None
    prior_mask: BinaryMask | None = None
    clicks: tuple = ()

    def __post_init__(self):
        h, w = self.image.height, self.image.width
        g = self.guidance
        if g is not None:
            if isinstance(g, GuidanceMap):
                if g.values.shape != (h, w):
                    raise ValueError("guidance dimensions differ from image")
            else:
                pos, neg = g
                if pos.shape != (h, w) or neg.shape != (h, w):
                    raise ValueError("distance rasters differ from image dims")
        if self.prior_mask is not None and (
                self.prior_mask.height != h or self.prior_mask.width != w):
            raise ValueError("prior mask dimensions differ from image")
        for c in self.clicks:
            if not (0 <= c.x < w and 0 <= c.y < h):
                raise ValueError("click (%d, %d) out of bounds" % (c.x, c.y))
        object.__setattr__(self, "clicks", tuple(self.clicks))

    def guidance_signal(self) -> np.ndarray:
        """Guidance as a single [-1, 1] raster (zeros when absent)."""
        h, w = self.image.height, self.image.width
        if self.guidance is None:
            return np.zeros((h, w))
        if isinstance(self.guidance, GuidanceMap):
            return self.guidance.values
        pos, neg = self.guidance
        scale = max(float(pos.max()), float(neg.max()), 1e-9)
        return np.clip((neg - pos) / scale, -1.0, 1.0)


@dataclass(frozen=True)
class AppearanceModel:
    """Object/background color mixtures learned from one annotated frame."""

    fg: object  # Gmm
    bg: object  # Gmm
    prior: float

    def __post_init__(self):
        if not (0.0 < self.prior < 1.0):
            raise ValueError("mixing prior must lie strictly inside (0, 1)")


def oracle_predict(gt: BinaryMask, noise_level: float = 0.0,
                   blur_radius: int = 0, seed: int = 0) -> ProbabilityMap:
    """Probability map derived from a known mask; deterministic per seed.

    The mask becomes {0.05, 0.95}, a box blur of the given radius softens
    boundaries, then a seeded `noise_level` fraction of pixels is pulled
    toward 0.5 (with a slight overshoot so some pixels change side).
    """
    if not (0.0 <= noise_level < 1.0):
        raise ValueError("noise_level must lie in [0, 1)")
    p = np.where(gt.labels, 0.95, 0.05)
    if blur_radius > 0:
        p = ndimage.uniform_filter(p, size=2 * blur_radius + 1,
                                   mode="nearest")
    if noise_level > 0.0:
        rng = np.random.default_rng(seed)
        hit = rng.random(p.shape) < noise_level
        u = rng.uniform(0.0, 1.2, p.shape)
        p = np.where(hit, p + (0.5 - p) * u, p)
    return ProbabilityMap(np.clip(p, 0.0, 1.0))


def _click_seeded_pixels(img: Image, clicks, polarity: str) -> np.ndarray:
    """Pixels within CLICK_SAMPLE_RADIUS of any click of the polarity."""
    h, w = img.height, img.width
    sel = np.zeros((h, w), dtype=bool)
    r = CLICK_SAMPLE_RADIUS
    ir = int(np.ceil(r))
    for c in clicks:
        if c.polarity != polarity:
            continue
        y0, y1 = max(0, c.y - ir), min(h, c.y + ir + 1)
        x0, x1 = max(0, c.x - ir), min(w, c.x + ir + 1)
        yy, xx = np.mgrid[y0:y1, x0:x1]
        sel[y0:y1, x0:x1] |= (yy - c.y) ** 2 + (xx - c.x) ** 2 <= r * r
    return img.pixels[sel].astype(np.float64)


def _border_ring_pixels(img: Image) -> np.ndarray:
    h, w = img.height, img.width
    width = max(1, min(h, w) // 10)
    sel = np.zeros((h, w), dtype=bool)
    sel[:width], sel[-width:] = True, True
    sel[:, :width], sel[:, -width:] = True, True
    return img.pixels[sel].astype(np.float64)


def _color_model_predict(spec: BackendSpec, req: PredictRequest) -> ProbabilityMap:
    p = spec.params
    lam_g = float(p.get("lambda_g", DEFAULT_LAMBDA_GUIDANCE))
    lam_m = float(p.get("lambda_m", DEFAULT_LAMBDA_MASK))
    k = int(p.get("k", 2))
    seed = int(p.get("seed", 0))
    img = req.image
    h, w = img.height, img.width
    all_px = img.pixels.reshape(-1, 3).astype(np.float64)

    fg_px = _click_seeded_pixels(img, req.clicks, POSITIVE)
    bg_px = _click_seeded_pixels(img, req.clicks, NEGATIVE)
    llr = np.zeros(h * w)
    if fg_px.shape[0] > 0:
        if bg_px.shape[0] == 0:
            bg_px = _border_ring_pixels(img)
        fg_model = fit_gmm(fg_px, min(k, fg_px.shape[0]), iterations=5,
                           seed=seed)
        bg_model = fit_gmm(bg_px, min(k, bg_px.shape[0]), iterations=5,
                           seed=seed + 1)
        llr = np.clip(fg_model.log_prob(all_px) - bg_model.log_prob(all_px),
                      -LLR_CLIP, LLR_CLIP)

    z = llr.reshape(h, w) + lam_g * req.guidance_signal()
    if req.prior_mask is not None:
        z = z + lam_m * (2.0 * req.prior_mask.labels.astype(np.float64) - 1.0)
    return ProbabilityMap(expit(z))


def _grabcut_adapter_predict(spec: BackendSpec, req: PredictRequest) -> ProbabilityMap:
    p = spec.params
    lam_g = float(p.get("lambda_g", DEFAULT_LAMBDA_GUIDANCE))
    margin = int(p.get("margin", 10))
    rounds = int(p.get("rounds", 5))
    seed = int(p.get("seed", 0))
    soft_fg = float(p.get("soft_fg", 0.9))
    soft_bg = float(p.get("soft_bg", 0.1))
    img = req.image
    g = req.guidance_signal()
    prior = req.prior_mask if req.prior_mask is not None else BinaryMask.empty(
        img.width, img.height)
    if "box" in p:
        # A caller-supplied box (the given-bounding-box protocol); otherwise
        # the box is grown heuristically around the mask and the clicks.
        box = BoxPrior(*(int(v) for v in p["box"])).clipped(img.width,
                                                            img.height)
    else:
        try:
            box = heuristic_box(prior, req.clicks, margin=margin)
        except ValueError:
            return ProbabilityMap(expit(lam_g * g))  # nothing to box yet
    mask = grabcut_segment(img, box, req.clicks,
                           init=req.prior_mask, rounds=rounds, seed=seed)
    soft = np.where(mask.labels, soft_fg, soft_bg)
    return ProbabilityMap(expit(logit(soft) + lam_g * g))


def _oracle_predict_backend(spec: BackendSpec, req: PredictRequest) -> ProbabilityMap:
    p = spec.params
    if "gt" not in p:
        raise ValueError("oracle backend requires a 'gt' RLE mask parameter")
    gt = rle_decode(rle_from_json(p["gt"]))
    if gt.height != req.image.height or gt.width != req.image.width:
        raise ValueError("oracle mask dimensions differ from image")
    return oracle_predict(gt, float(p.get("noise_level", 0.0)),
                          int(p.get("blur_radius", 0)), int(p.get("seed", 0)))


_BACKENDS = {
    "oracle": _oracle_predict_backend,
    "color_model": _color_model_predict,
    "grabcut_adapter": _grabcut_adapter_predict,
}


def predict(spec: BackendSpec, req: PredictRequest) -> ProbabilityMap:
    """Run the backend named by `spec`; output dims equal the image's."""
    return _BACKENDS[spec.kind](spec, req)


def fit_first_frame_model(img: Image, mask: BinaryMask,
                          k: int = 5, seed: int = 0) -> AppearanceModel:
    """Learn object/background color mixtures from one annotated frame."""
    if mask.height != img.height or mask.width != img.width:
        raise ValueError("mask dimensions differ from image")
    fg_px = img.pixels[mask.labels].astype(np.float64)
    bg_px = img.pixels[~mask.labels].astype(np.float64)
    if fg_px.shape[0] == 0 or bg_px.shape[0] == 0:
        raise ValueError("mask must contain both foreground and background")
    fg = fit_gmm(fg_px, min(k, fg_px.shape[0]), iterations=10, seed=seed)
    bg = fit_gmm(bg_px, min(k, bg_px.shape[0]), iterations=10, seed=seed + 1)
    prior = mask.area / float(mask.height * mask.width)
    return AppearanceModel(fg, bg, prior)


def propagate_sequence(frames, first_mask: BinaryMask,
                       model: AppearanceModel,
                       crf_params: CrfParams | None = None,
                       temporal_weight: float = 2.0,
                       temporal_blur_sigma: float = 3.0):
    """Segment a frame sequence given the first frame's mask.

    Frame 0's output is `first_mask` verbatim. Each later frame's unary is
    sigmoid(color log-likelihood ratio + temporal_weight * (2 * blurred
    previous mask - 1)), refined by the CRF; frames are processed in order.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("at least one frame required")
    if (first_mask.height != frames[0].height
            or first_mask.width != frames[0].width):
        raise ValueError("first mask dimensions differ from frames")
    params = crf_params if crf_params is not None else CrfParams()
    masks = [first_mask]
    for frame in frames[1:]:
        px = frame.pixels.reshape(-1, 3).astype(np.float64)
        llr = np.clip(model.fg.log_prob(px) - model.bg.log_prob(px),
                      -LLR_CLIP, LLR_CLIP).reshape(frame.height, frame.width)
        prev = masks[-1].labels.astype(np.float64)
        blurred = ndimage.gaussian_filter(prev, temporal_blur_sigma)
        unary = expit(llr + temporal_weight * (2.0 * blurred - 1.0))
        masks.append(crf_refine(ProbabilityMap(unary), frame, params))
    return masks
