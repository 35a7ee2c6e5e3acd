"""Session lifecycle: refinement, undo, replay, sequences, persistence."""
import numpy as np
import pytest

from clickseg.core import BinaryMask, Image, iou, rle_encode, rle_to_json
from clickseg.crf import CrfParams
from clickseg.engine import (
    SequenceSession,
    Session,
    frame_scores,
    load_sequence,
    load_session,
    new_sequence,
    new_session,
    refine_frame,
    refine_step,
    replay,
    save_sequence,
    save_session,
    segment_sequence,
    undo,
    worst_frame,
)
from clickseg.evaluation import pole_of_inaccessibility
from clickseg.guidance import NEGATIVE, POSITIVE, Click, EncodingConfig
from clickseg.predict import BackendSpec
from clickseg.synth import translating_sequence, two_tone_scene

# Zero pairwise terms turn the CRF into pure thresholding, which makes
# oracle-driven steps byte-predictable.
ZERO_CRF = CrfParams(w_app=0.0, w_smooth=0.0)
SOFT_CRF = CrfParams(w_app=0.0, w_smooth=0.05)


def oracle_spec(gt: BinaryMask, **extra) -> BackendSpec:
    return BackendSpec("oracle", {"gt": rle_to_json(rle_encode(gt)), **extra})


def pole_click(gt: BinaryMask, polarity: str = POSITIVE) -> Click:
    x, y = pole_of_inaccessibility(gt.labels)
    return Click(x, y, polarity)


def assert_sessions_equal(a: Session, b: Session) -> None:
    assert a.id == b.id
    assert np.array_equal(a.image.pixels, b.image.pixels)
    assert a.backend == b.backend
    assert a.encoding == b.encoding
    assert a.crf == b.crf
    assert a.click_history == b.click_history
    assert len(a.mask_history) == len(b.mask_history)
    for ma, mb in zip(a.mask_history, b.mask_history):
        assert np.array_equal(ma.labels, mb.labels)
    assert a.soft_clicks == b.soft_clicks
    assert a.use_prior_mask == b.use_prior_mask
    assert a.created == b.created and a.updated == b.updated


# --- session construction ----------------------------------------------------

def test_session_history_shape_enforced():
    img, gt = two_tone_scene(seed=0)
    base = new_session(img, oracle_spec(gt))
    with pytest.raises(ValueError):
        Session(id="x", image=img, backend=base.backend,
                encoding=base.encoding, crf=base.crf,
                click_history=((Click(1, 1, POSITIVE),),),
                mask_history=base.mask_history)  # one mask for one step
    with pytest.raises(ValueError):
        Session(id="x", image=img, backend=base.backend,
                encoding=base.encoding, crf=base.crf,
                click_history=(), mask_history=(BinaryMask.empty(3, 3),))
    with pytest.raises(ValueError):
        Session(id="x", image=img, backend=base.backend,
                encoding=base.encoding, crf=base.crf,
                click_history=((Click(img.width, 0, POSITIVE),),),
                mask_history=base.mask_history + base.mask_history[:1])


def test_new_session_defaults():
    img, gt = two_tone_scene(seed=1)
    s = new_session(img, oracle_spec(gt), session_id="abc")
    assert s.id == "abc"
    assert s.steps == 0
    assert s.current_mask.area == 0
    seeded = new_session(img, oracle_spec(gt), initial_mask=gt)
    assert np.array_equal(seeded.current_mask.labels, gt.labels)


# --- refinement --------------------------------------------------------------

def test_single_click_recovers_oracle_mask():
    img, gt = two_tone_scene(seed=2)
    s = new_session(img, oracle_spec(gt), crf=ZERO_CRF)
    s, mask = refine_step(s, [pole_click(gt)])
    assert np.array_equal(mask.labels, gt.labels)
    assert s.steps == 1
    assert s.current_mask is mask


def test_refine_step_rejects_out_of_bounds_click():
    img, gt = two_tone_scene(seed=3)
    s = new_session(img, oracle_spec(gt))
    with pytest.raises(ValueError):
        refine_step(s, [Click(0, img.height, POSITIVE)])


def test_empty_step_passes_prior_through():
    img, gt = two_tone_scene(seed=4)
    s = new_session(img, BackendSpec("color_model"), crf=ZERO_CRF,
                    initial_mask=gt)
    s, mask = refine_step(s, [])
    assert np.array_equal(mask.labels, gt.labels)
    assert s.steps == 1


def test_negative_click_is_clamped_out():
    img, gt = two_tone_scene(seed=5)
    full = BinaryMask(np.ones((img.height, img.width), dtype=bool))
    s = new_session(img, oracle_spec(full), crf=ZERO_CRF)
    s, mask = refine_step(s, [Click(10, 10, NEGATIVE)])
    assert not mask.labels[10, 10]
    assert mask.labels[30, 30]


def test_soft_clicks_shape_guidance_but_are_not_clamped():
    img, gt = two_tone_scene(seed=6)
    soft = (Click(2, 2, NEGATIVE),)
    # backend says everything is foreground; a soft negative click must not
    # force its neighborhood out of the mask
    full = BinaryMask(np.ones((img.height, img.width), dtype=bool))
    s = new_session(img, oracle_spec(full), crf=ZERO_CRF, soft_clicks=soft)
    s, mask = refine_step(s, [pole_click(gt)])
    assert mask.labels[2, 2]


def test_undo_pops_one_step_and_replay_rebuilds():
    img, gt = two_tone_scene(seed=7, noise=3.0)
    ys, xs = np.nonzero(gt.labels)
    bys, bxs = np.nonzero(~gt.labels)
    s = new_session(img, BackendSpec("color_model"), crf=SOFT_CRF)
    s, _ = refine_step(s, [Click(int(xs[len(xs) // 2]),
                                 int(ys[len(ys) // 2]), POSITIVE)])
    s, _ = refine_step(s, [Click(int(bxs[0]), int(bys[0]), NEGATIVE)])
    s, _ = refine_step(s, [Click(int(xs[5]), int(ys[5]), POSITIVE)])
    assert s.steps == 3

    popped = undo(s)
    assert popped.steps == 2
    assert popped.click_history == s.click_history[:-1]
    assert np.array_equal(popped.current_mask.labels,
                          s.mask_history[-2].labels)

    rebuilt = replay(s)
    assert rebuilt.click_history == s.click_history
    for got, want in zip(rebuilt.mask_history, s.mask_history):
        assert np.array_equal(got.labels, want.labels)


def test_undo_on_fresh_session_fails():
    img, gt = two_tone_scene(seed=8)
    with pytest.raises(ValueError):
        undo(new_session(img, oracle_spec(gt)))


def test_identical_sessions_produce_identical_masks():
    img, gt = two_tone_scene(seed=9, noise=4.0)
    clicks = [pole_click(gt)]
    masks = []
    for _ in range(2):
        s = new_session(img, BackendSpec("color_model"), crf=SOFT_CRF)
        s, m = refine_step(s, clicks)
        masks.append(m)
    assert np.array_equal(masks[0].labels, masks[1].labels)


# --- session persistence -----------------------------------------------------

def test_session_directory_roundtrip(tmp_path):
    img, gt = two_tone_scene(seed=10, noise=3.0)
    s = new_session(img, oracle_spec(gt), crf=SOFT_CRF,
                    encoding=EncodingConfig(sigma=7.0),
                    soft_clicks=(Click(1, 1, POSITIVE),),
                    use_prior_mask=False)
    s, _ = refine_step(s, [pole_click(gt)])
    s, _ = refine_step(s, [Click(0, 0, NEGATIVE), Click(2, 3, NEGATIVE)])
    save_session(s, str(tmp_path / "sess"))
    assert_sessions_equal(load_session(str(tmp_path / "sess")), s)


def test_saving_shorter_history_prunes_stale_masks(tmp_path):
    img, gt = two_tone_scene(seed=11)
    s = new_session(img, oracle_spec(gt), crf=ZERO_CRF)
    for _ in range(3):
        s, _ = refine_step(s, [pole_click(gt)])
    d = tmp_path / "sess"
    save_session(s, str(d))
    assert (d / "masks" / "0003.pgm").exists()
    save_session(undo(s), str(d))
    assert not (d / "masks" / "0003.pgm").exists()
    assert load_session(str(d)).steps == 2


# --- sequences ---------------------------------------------------------------

def seeded_sequence(seed: int, n_frames: int = 6, **kwargs):
    """A propagated sequence whose first frame was refined to ground truth."""
    frames, gts = translating_sequence(seed=seed, n_frames=n_frames, **kwargs)
    first = new_session(frames[0], oracle_spec(gts[0]), crf=ZERO_CRF)
    first, _ = refine_step(first, [pole_click(gts[0])])
    seq = new_sequence(frames, first, crf=SOFT_CRF)
    return segment_sequence(seq), frames, gts


def test_sequence_needs_frames():
    img, gt = two_tone_scene(seed=12)
    first = new_session(img, oracle_spec(gt))
    with pytest.raises(ValueError):
        new_sequence([], first)


def test_propagation_requires_nonempty_first_mask():
    frames, gts = translating_sequence(seed=13, n_frames=3)
    first = new_session(frames[0], oracle_spec(gts[0]))  # never refined
    with pytest.raises(ValueError):
        segment_sequence(new_sequence(frames, first))


def test_sequence_propagation_tracks_object():
    seq, frames, gts = seeded_sequence(14)
    assert np.array_equal(seq.masks[0].labels, gts[0].labels)
    for m, gt in zip(seq.masks, gts):
        assert iou(m, gt) >= 0.8


def test_propagation_is_idempotent():
    seq, _, _ = seeded_sequence(15)
    again = segment_sequence(seq)
    for a, b in zip(seq.masks, again.masks):
        assert np.array_equal(a.labels, b.labels)


def test_single_frame_sequence_keeps_first_mask():
    frames, gts = translating_sequence(seed=16, n_frames=1)
    first = new_session(frames[0], oracle_spec(gts[0]), crf=ZERO_CRF)
    first, _ = refine_step(first, [pole_click(gts[0])])
    seq = segment_sequence(new_sequence(frames, first))
    assert len(seq.masks) == 1
    assert np.array_equal(seq.masks[0].labels, gts[0].labels)
    with pytest.raises(ValueError):
        worst_frame(seq)  # no consecutive pair to compare


# --- frame scoring -----------------------------------------------------------

def hand_sequence(masks):
    """A SequenceSession with the given masks stitched in directly."""
    h, w = masks[0].labels.shape
    img = Image(np.zeros((h, w, 3), dtype=np.uint8))
    first = new_session(img, BackendSpec("color_model"))
    return SequenceSession(id="hand", frames=(img,) * len(masks),
                           first_frame_session=first, crf=CrfParams(),
                           masks=tuple(masks))


def square_mask(x0, x1):
    labels = np.zeros((10, 10), dtype=bool)
    labels[2:8, x0:x1] = True
    return BinaryMask(labels)


def test_frame_scores_against_ground_truth():
    a, b = square_mask(0, 5), square_mask(5, 10)
    seq = hand_sequence([a, a, b])
    assert frame_scores(seq, [a, a, a]) == [1.0, 1.0, 0.0]
    assert worst_frame(seq, [a, a, a]) == 2
    with pytest.raises(ValueError):
        frame_scores(seq, [a, a])


def test_frame_scores_without_ground_truth():
    a, b = square_mask(0, 5), square_mask(4, 9)
    scores = frame_scores(hand_sequence([a, a, b]))
    assert scores[0] is None
    assert scores[1] == 1.0
    assert scores[2] == pytest.approx(1.0 / 9.0)  # 6 rows: overlap 1, union 9


def test_worst_frame_tie_breaks_to_lowest_index():
    a = square_mask(0, 5)
    seq = hand_sequence([a, a, a])
    assert worst_frame(seq, [a, a, a]) == 0
    assert worst_frame(seq) == 1  # frame 0 carries no consecutive score


def test_scores_need_propagated_masks():
    frames, gts = translating_sequence(seed=17, n_frames=3)
    first = new_session(frames[0], oracle_spec(gts[0]))
    seq = new_sequence(frames, first)
    with pytest.raises(ValueError):
        frame_scores(seq)
    with pytest.raises(ValueError):
        refine_frame(seq, 1, [])


# --- frame correction --------------------------------------------------------

def empty_rle(width, height):
    return rle_to_json(rle_encode(BinaryMask.empty(width, height)))


def test_refine_frame_touches_only_its_frame():
    seq, frames, gts = seeded_sequence(18)
    t = 3
    fixed = refine_frame(seq, t, [pole_click(gts[t])],
                         backend=oracle_spec(gts[t]))
    assert np.array_equal(fixed.masks[t].labels, gts[t].labels)
    for u in range(len(frames)):
        if u != t:
            assert np.array_equal(fixed.masks[u].labels, seq.masks[u].labels)
    assert [u for u, _ in fixed.refined] == [t]


def test_refine_frame_resumes_existing_session():
    seq, frames, gts = seeded_sequence(19)
    once = refine_frame(seq, 2, [pole_click(gts[2])],
                        backend=oracle_spec(gts[2]))
    twice = refine_frame(once, 2, [Click(0, 0, NEGATIVE)])
    assert dict(twice.refined)[2].steps == 2
    # the resumed session keeps the backend it was opened with
    assert dict(twice.refined)[2].backend == oracle_spec(gts[2])


def test_refine_frame_validates_index():
    seq, frames, _ = seeded_sequence(20)
    for bad in (-1, len(frames)):
        with pytest.raises(ValueError):
            refine_frame(seq, bad, [])


def test_refine_frame_respects_clamps():
    seq, frames, gts = seeded_sequence(21)
    t = 2
    x, y = pole_of_inaccessibility(gts[t].labels)
    fixed = refine_frame(seq, t, [Click(x, y, NEGATIVE)],
                         backend=oracle_spec(gts[t]))
    assert not fixed.masks[t].labels[y, x]


def test_repropagation_recomputes_frames_after_anchor():
    seq, frames, gts = seeded_sequence(22)
    t = 3
    w, h = frames[0].width, frames[0].height
    # wipe frame t and push the wipe downstream: with the anchor empty the
    # temporal term pins every later frame to background
    wiped = refine_frame(
        seq, t, [Click(0, 0, NEGATIVE)],
        backend=BackendSpec("oracle", {"gt": empty_rle(w, h)}),
        repropagate=True)
    assert wiped.masks[t].area == 0
    for u in range(t + 1, len(frames)):
        assert wiped.masks[u].area == 0
    for u in range(t):  # frames before the anchor stay put
        assert np.array_equal(wiped.masks[u].labels, seq.masks[u].labels)

    # correcting a fresh copy back to ground truth restores the tail
    fixed = refine_frame(seq, t, [pole_click(gts[t])],
                         backend=oracle_spec(gts[t]), repropagate=True)
    for u in range(t, len(frames)):
        assert iou(fixed.masks[u], gts[u]) >= 0.8


# --- sequence persistence ----------------------------------------------------

def test_sequence_directory_roundtrip(tmp_path):
    seq, frames, gts = seeded_sequence(23)
    seq = refine_frame(seq, 1, [pole_click(gts[1])],
                       backend=oracle_spec(gts[1]))
    save_sequence(seq, str(tmp_path / "seq"))
    loaded = load_sequence(str(tmp_path / "seq"))
    assert loaded.id == seq.id
    assert loaded.crf == seq.crf
    assert loaded.temporal_weight == seq.temporal_weight
    assert len(loaded.frames) == len(seq.frames)
    for a, b in zip(loaded.frames, seq.frames):
        assert np.array_equal(a.pixels, b.pixels)
    for a, b in zip(loaded.masks, seq.masks):
        assert np.array_equal(a.labels, b.labels)
    assert_sessions_equal(loaded.first_frame_session,
                          seq.first_frame_session)
    assert [t for t, _ in loaded.refined] == [1]
    assert_sessions_equal(dict(loaded.refined)[1], dict(seq.refined)[1])


def test_unpropagated_sequence_roundtrip(tmp_path):
    frames, gts = translating_sequence(seed=24, n_frames=3)
    first = new_session(frames[0], oracle_spec(gts[0]))
    seq = new_sequence(frames, first)
    save_sequence(seq, str(tmp_path / "seq"))
    loaded = load_sequence(str(tmp_path / "seq"))
    assert loaded.masks is None
    assert loaded.refined == ()
