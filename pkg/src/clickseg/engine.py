"""Interactive refinement sessions for images and frame sequences.

A Session is an immutable value: every refinement step returns a new
Session with the click group and resulting mask appended, so undo is a
history pop and any mask is reproducible by replaying the clicks that led
to it. The step pipeline is: encode all clicks into a guidance map, run
the probability backend (with the previous mask as prior), clamp click
neighborhoods in the probability map, refine with the CRF, then clamp the
thresholded mask again so user labels always win.
"""
from __future__ import annotations

import json
import os
import time
import uuid
from dataclasses import dataclass, replace

from .core import (
    BinaryMask,
    Image,
    load_json,
    read_bytes,
    read_pgm_mask,
    read_ppm,
    save_bytes,
    save_json,
    write_pgm_mask,
    write_ppm,
)
from .crf import CrfParams, crf_refine
from .guidance import (
    Click,
    EncodingConfig,
    clamp_constraints,
    clamp_mask,
    encode_gaussian,
)
from .predict import (
    BackendSpec,
    PredictRequest,
    fit_first_frame_model,
    predict,
    propagate_sequence,
)

__all__ = [
    "Session",
    "SequenceSession",
    "new_session",
    "refine_step",
    "undo",
    "replay",
    "new_sequence",
    "segment_sequence",
    "frame_scores",
    "worst_frame",
    "refine_frame",
    "save_session",
    "load_session",
    "save_sequence",
    "load_sequence",
]


@dataclass(frozen=True)
class Session:
    """One interactive segmentation of one image.

    `click_history` groups clicks by refinement step; `mask_history[0]` is
    the initial mask (empty unless seeded) and `mask_history[k]` the result
    of step k. `soft_clicks` shape the guidance map only — they are never
    clamped into the output and never reach the backend as constraints.
    """

    id: str
    image: Image
    backend: BackendSpec
    encoding: EncodingConfig
    crf: CrfParams
    click_history: tuple
    mask_history: tuple
    soft_clicks: tuple = ()
    use_prior_mask: bool = True
    created: float = 0.0
    updated: float = 0.0

    def __post_init__(self):
        if len(self.mask_history) != len(self.click_history) + 1:
            raise ValueError("mask history must have one entry per step "
                             "plus the initial mask")
        h, w = self.image.height, self.image.width
        for m in self.mask_history:
            if m.height != h or m.width != w:
                raise ValueError("mask dimensions differ from image")
        for group in self.click_history:
            for c in group:
                self._check_bounds(c)
        for c in self.soft_clicks:
            self._check_bounds(c)
        object.__setattr__(self, "click_history",
                           tuple(tuple(g) for g in self.click_history))
        object.__setattr__(self, "mask_history", tuple(self.mask_history))
        object.__setattr__(self, "soft_clicks", tuple(self.soft_clicks))

    def _check_bounds(self, c: Click):
        if not (0 <= c.x < self.image.width and 0 <= c.y < self.image.height):
            raise ValueError("click (%d, %d) out of bounds" % (c.x, c.y))

    @property
    def steps(self) -> int:
        return len(self.click_history)

    @property
    def current_mask(self) -> BinaryMask:
        return self.mask_history[-1]

    def all_clicks(self) -> tuple:
        return tuple(c for group in self.click_history for c in group)


def new_session(image: Image, backend: BackendSpec,
                encoding: EncodingConfig | None = None,
                crf: CrfParams | None = None,
                initial_mask: BinaryMask | None = None,
                soft_clicks=(), use_prior_mask: bool = True,
                session_id: str | None = None) -> Session:
    now = time.time()
    return Session(
        id=session_id or uuid.uuid4().hex,
        image=image,
        backend=backend,
        encoding=encoding or EncodingConfig(),
        crf=crf or CrfParams(),
        click_history=(),
        mask_history=(initial_mask if initial_mask is not None
                      else BinaryMask.empty(image.width, image.height),),
        soft_clicks=tuple(soft_clicks),
        use_prior_mask=use_prior_mask,
        created=now,
        updated=now,
    )


def refine_step(s: Session, new_clicks) -> tuple:
    """One refinement: returns the updated session and its new mask."""
    new_clicks = tuple(new_clicks)
    for c in new_clicks:
        s._check_bounds(c)
    clicks = s.all_clicks() + new_clicks
    guidance = encode_gaussian(clicks + s.soft_clicks, s.image.width,
                               s.image.height, s.encoding)
    prior = s.current_mask if s.use_prior_mask else None
    # Soft clicks carry full evidence (guidance and color seeding); they
    # are only exempt from the hard clamps.
    p = predict(s.backend,
                PredictRequest(s.image, guidance, prior,
                               clicks + s.soft_clicks))
    p = clamp_constraints(p, clicks, s.encoding)
    mask = crf_refine(p, s.image, s.crf)
    mask = clamp_mask(mask, clicks, s.encoding)
    s2 = replace(s,
                 click_history=s.click_history + (new_clicks,),
                 mask_history=s.mask_history + (mask,),
                 updated=time.time())
    return s2, mask


def undo(s: Session) -> Session:
    """Drop the last refinement step; replaying it reproduces its mask."""
    if s.steps == 0:
        raise ValueError("nothing to undo")
    return replace(s,
                   click_history=s.click_history[:-1],
                   mask_history=s.mask_history[:-1],
                   updated=time.time())


def replay(s: Session) -> Session:
    """Rebuild the session by re-running every step from scratch."""
    fresh = replace(s, click_history=(), mask_history=s.mask_history[:1])
    for group in s.click_history:
        fresh, _ = refine_step(fresh, group)
    return fresh


@dataclass(frozen=True)
class SequenceSession:
    """One frame sequence, its per-frame masks, and any frame corrections."""

    id: str
    frames: tuple
    first_frame_session: Session
    crf: CrfParams
    temporal_weight: float = 2.0
    masks: tuple | None = None
    refined: tuple = ()  # of (frame index, Session)
    created: float = 0.0
    updated: float = 0.0

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a sequence needs at least one frame")
        if self.masks is not None and len(self.masks) != len(self.frames):
            raise ValueError("one mask per frame required once propagated")
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.masks is not None:
            object.__setattr__(self, "masks", tuple(self.masks))
        object.__setattr__(self, "refined", tuple(self.refined))


def new_sequence(frames, first_frame_session: Session,
                 crf: CrfParams | None = None, temporal_weight: float = 2.0,
                 sequence_id: str | None = None) -> SequenceSession:
    now = time.time()
    return SequenceSession(
        id=sequence_id or uuid.uuid4().hex,
        frames=tuple(frames),
        first_frame_session=first_frame_session,
        crf=crf or CrfParams(),
        temporal_weight=temporal_weight,
        created=now,
        updated=now,
    )


def segment_sequence(seq: SequenceSession) -> SequenceSession:
    """Propagate the finalized first-frame mask through all frames."""
    first_mask = seq.first_frame_session.current_mask
    if first_mask.area == 0:
        raise ValueError("first-frame mask is empty; refine it first")
    model = fit_first_frame_model(seq.frames[0], first_mask)
    masks = propagate_sequence(seq.frames, first_mask, model, seq.crf,
                               seq.temporal_weight)
    return replace(seq, masks=tuple(masks), updated=time.time())


def frame_scores(seq: SequenceSession, gts=None) -> list:
    """Per-frame quality scores: IOU vs GT, or consecutive-frame IOU.

    Without ground truth the score of frame t (t >= 1) is IOU(mask_t,
    mask_{t-1}); frame 0 is exempt and carries no score (None).
    """
    from .core import iou

    if seq.masks is None:
        raise ValueError("sequence masks not computed")
    if gts is not None:
        if len(gts) != len(seq.masks):
            raise ValueError("one ground-truth mask per frame required")
        return [iou(m, g) for m, g in zip(seq.masks, gts)]
    scores = [None]
    for t in range(1, len(seq.masks)):
        scores.append(iou(seq.masks[t], seq.masks[t - 1]))
    return scores


def worst_frame(seq: SequenceSession, gts=None) -> int:
    """Frame index most in need of correction; ties pick the lowest index."""
    scores = frame_scores(seq, gts)
    if gts is not None:
        best = min(range(len(scores)), key=lambda t: (scores[t], t))
        return best
    candidates = range(1, len(scores))
    if not candidates:
        raise ValueError("single-frame sequence has no comparable frames")
    return min(candidates, key=lambda t: (scores[t], t))


def refine_frame(seq: SequenceSession, t: int, clicks,
                 backend: BackendSpec | None = None,
                 repropagate: bool = False) -> SequenceSession:
    """Apply correction clicks to frame t, optionally re-propagating past it.

    Opens (or resumes) a per-frame Session whose prior mask is the current
    mask of frame t. With `repropagate`, frames after t are recomputed with
    the corrected mask as the new temporal anchor; the appearance model
    stays the one learned on the first frame.
    """
    if seq.masks is None:
        raise ValueError("sequence masks not computed")
    if not (0 <= t < len(seq.frames)):
        raise ValueError("frame index %d out of range" % t)
    existing = dict(seq.refined)
    if t in existing:
        sess = existing[t]
    else:
        first = seq.first_frame_session
        sess = new_session(seq.frames[t], backend or first.backend,
                           encoding=first.encoding, crf=seq.crf,
                           initial_mask=seq.masks[t])
    sess, corrected = refine_step(sess, clicks)
    masks = list(seq.masks)
    masks[t] = corrected
    if repropagate and t + 1 < len(seq.frames):
        first_mask = seq.first_frame_session.current_mask
        model = fit_first_frame_model(seq.frames[0], first_mask)
        tail = propagate_sequence(seq.frames[t:], corrected, model, seq.crf,
                                  seq.temporal_weight)
        masks[t + 1:] = tail[1:]
    existing[t] = sess
    return replace(seq, masks=tuple(masks),
                   refined=tuple(sorted(existing.items())),
                   updated=time.time())


# --- directory persistence -------------------------------------------------

def _clicks_json(groups) -> list:
    return [[c.to_json() for c in group] for group in groups]


def _clicks_from_json(data) -> tuple:
    return tuple(tuple(Click.from_json(c) for c in group) for group in data)


def save_session(s: Session, dirpath: str) -> None:
    """Persist as image.ppm + clicks.json + masks/NNNN.pgm + meta.json."""
    os.makedirs(os.path.join(dirpath, "masks"), exist_ok=True)
    save_bytes(os.path.join(dirpath, "image.ppm"), write_ppm(s.image))
    save_json(os.path.join(dirpath, "clicks.json"), {
        "steps": _clicks_json(s.click_history),
        "soft_clicks": [c.to_json() for c in s.soft_clicks],
    })
    for i, m in enumerate(s.mask_history):
        save_bytes(os.path.join(dirpath, "masks", "%04d.pgm" % i), write_pgm_mask(m))
    for stale in range(len(s.mask_history), len(s.mask_history) + 2):
        path = os.path.join(dirpath, "masks", "%04d.pgm" % stale)
        if os.path.exists(path):
            os.remove(path)
    save_json(os.path.join(dirpath, "meta.json"), {
        "id": s.id,
        "backend": s.backend.to_json(),
        "encoding": s.encoding.to_json(),
        "crf": s.crf.to_json(),
        "use_prior_mask": s.use_prior_mask,
        "created": s.created,
        "updated": s.updated,
    })


def load_session(dirpath: str) -> Session:
    meta = load_json(os.path.join(dirpath, "meta.json"))
    clicks = load_json(os.path.join(dirpath, "clicks.json"))
    image = read_ppm(read_bytes(os.path.join(dirpath, "image.ppm")))
    groups = _clicks_from_json(clicks["steps"])
    masks = []
    for i in range(len(groups) + 1):
        masks.append(read_pgm_mask(read_bytes(os.path.join(dirpath, "masks",
                                                "%04d.pgm" % i))))
    return Session(
        id=meta["id"],
        image=image,
        backend=BackendSpec.from_json(meta["backend"]),
        encoding=EncodingConfig.from_json(meta["encoding"]),
        crf=CrfParams.from_json(meta["crf"]),
        click_history=groups,
        mask_history=tuple(masks),
        soft_clicks=tuple(Click.from_json(c)
                          for c in clicks.get("soft_clicks", [])),
        use_prior_mask=bool(meta.get("use_prior_mask", True)),
        created=float(meta["created"]),
        updated=float(meta["updated"]),
    )


def save_sequence(seq: SequenceSession, dirpath: str) -> None:
    """Persist frames/, framemasks/, the first-frame session, corrections."""
    os.makedirs(os.path.join(dirpath, "frames"), exist_ok=True)
    for t, frame in enumerate(seq.frames):
        save_bytes(os.path.join(dirpath, "frames", "%04d.ppm" % t), write_ppm(frame))
    if seq.masks is not None:
        os.makedirs(os.path.join(dirpath, "framemasks"), exist_ok=True)
        for t, m in enumerate(seq.masks):
            save_bytes(os.path.join(dirpath, "framemasks",
                                        "%04d.pgm" % t), write_pgm_mask(m))
    save_session(seq.first_frame_session,
                 os.path.join(dirpath, "first_frame"))
    for t, sess in seq.refined:
        save_session(sess, os.path.join(dirpath, "refined", "%04d" % t))
    save_json(os.path.join(dirpath, "meta.json"), {
        "id": seq.id,
        "crf": seq.crf.to_json(),
        "temporal_weight": seq.temporal_weight,
        "n_frames": len(seq.frames),
        "has_masks": seq.masks is not None,
        "refined": [t for t, _ in seq.refined],
        "created": seq.created,
        "updated": seq.updated,
    })


def load_sequence(dirpath: str) -> SequenceSession:
    meta = load_json(os.path.join(dirpath, "meta.json"))
    frames = tuple(read_ppm(read_bytes(os.path.join(dirpath, "frames", "%04d.ppm" % t)))
                   for t in range(int(meta["n_frames"])))
    masks = None
    if meta.get("has_masks"):
        masks = tuple(read_pgm_mask(read_bytes(os.path.join(dirpath, "framemasks",
                                                 "%04d.pgm" % t)))
                      for t in range(len(frames)))
    refined = tuple(
        (t, load_session(os.path.join(dirpath, "refined", "%04d" % t)))
        for t in meta.get("refined", []))
    return SequenceSession(
        id=meta["id"],
        frames=frames,
        first_frame_session=load_session(os.path.join(dirpath,
                                                      "first_frame")),
        crf=CrfParams.from_json(meta["crf"]),
        temporal_weight=float(meta["temporal_weight"]),
        masks=masks,
        refined=refined,
        created=float(meta["created"]),
        updated=float(meta["updated"]),
    )
