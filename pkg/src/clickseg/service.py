"""HTTP facade over interactive sessions and sequences, plus persistence.

All endpoints live under /v1 and speak UTF-8 JSON (sequence creation is
multipart). Masks travel as RLE JSON objects, never as image payloads.
Sessions persist to a data directory after every mutation and reload on
demand, so state survives a process restart. Per-session mutation is
serialized: a second concurrent mutation on the same session gets an
immediate conflict instead of interleaved state.
"""
from __future__ import annotations

import base64
import binascii
import os
import threading
from dataclasses import replace

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from starlette.datastructures import UploadFile

from .core import (
    BinaryMask,
    iou,
    read_pgm_mask,
    read_ppm,
    rle_decode,
    rle_encode,
    rle_from_json,
    rle_to_json,
    save_bytes,
    write_pgm_mask,
)
from .crf import CrfParams
from .engine import (
    Session,
    SequenceSession,
    load_sequence,
    load_session,
    new_sequence,
    new_session,
    refine_frame,
    refine_step,
    save_sequence,
    save_session,
    segment_sequence,
    undo,
    worst_frame,
    frame_scores,
)
from .guidance import Click, EncodingConfig, Stroke, rasterize_stroke
from .predict import BackendSpec
from .simulate import SamplingConfig

__all__ = ["ApiError", "create_app", "DEFAULT_PORT", "resolve_data_dir"]

DEFAULT_PORT = 8790
DATA_DIR_ENV = "CLICKSEG_DATA_DIR"
STATIC_DIR_ENV = "CLICKSEG_STATIC_DIR"
# Strokes rasterize server-side so the click spacing has one source of
# truth: the user-model's step distance.
STROKE_SPACING = float(SamplingConfig().d_step)

ERROR_CODES = ("bad_request", "not_found", "conflict", "internal")
_STATUS = {"bad_request": 400, "not_found": 404, "conflict": 409,
           "internal": 500}


class ApiError(Exception):
    """Machine-readable service error: code from a fixed enumeration."""

    def __init__(self, code: str, message: str):
        if code not in ERROR_CODES:
            raise ValueError("unknown error code %r" % code)
        super().__init__(message)
        self.code = code
        self.message = message
        self.http_status = _STATUS[code]

    def to_json(self) -> dict:
        return {"code": self.code, "message": self.message}


def resolve_data_dir(arg: str | None = None) -> str:
    """Data directory: the environment override wins, then the argument."""
    return os.environ.get(DATA_DIR_ENV) or arg or "./clickseg-data"


class _Store:
    """Session/sequence registry: in-memory cache + directory persistence."""

    def __init__(self, data_dir: str):
        self.data_dir = data_dir
        self.sessions: dict[str, Session] = {}
        self.sequences: dict[str, SequenceSession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def _session_dir(self, sid: str) -> str:
        return os.path.join(self.data_dir, "sessions", sid)

    def _sequence_dir(self, qid: str) -> str:
        return os.path.join(self.data_dir, "sequences", qid)

    def lock_for(self, key: str) -> threading.Lock:
        with self._registry_lock:
            if key not in self._locks:
                self._locks[key] = threading.Lock()
            return self._locks[key]

    def get_session(self, sid: str) -> Session:
        if sid in self.sessions:
            return self.sessions[sid]
        d = self._session_dir(sid)
        if not os.path.isdir(d):
            raise ApiError("not_found", "no session %r" % sid)
        s = load_session(d)
        self.sessions[sid] = s
        return s

    def put_session(self, s: Session) -> None:
        self.sessions[s.id] = s
        save_session(s, self._session_dir(s.id))

    def session_gt(self, sid: str) -> BinaryMask | None:
        path = os.path.join(self._session_dir(sid), "gt.pgm")
        if not os.path.exists(path):
            return None
        with open(path, "rb") as f:
            return read_pgm_mask(f.read())

    def put_session_gt(self, sid: str, gt: BinaryMask) -> None:
        save_bytes(os.path.join(self._session_dir(sid), "gt.pgm"),
                   write_pgm_mask(gt))

    def get_sequence(self, qid: str) -> SequenceSession:
        if qid in self.sequences:
            return self.sequences[qid]
        d = self._sequence_dir(qid)
        if not os.path.isdir(d):
            raise ApiError("not_found", "no sequence %r" % qid)
        seq = load_sequence(d)
        self.sequences[qid] = seq
        return seq

    def put_sequence(self, seq: SequenceSession) -> None:
        self.sequences[seq.id] = seq
        save_sequence(seq, self._sequence_dir(seq.id))


def _mask_json(m: BinaryMask) -> dict:
    return rle_to_json(rle_encode(m))


def _mask_from_json(obj, what: str) -> BinaryMask:
    try:
        return rle_decode(rle_from_json(obj))
    except (KeyError, TypeError, ValueError) as e:
        raise ApiError("bad_request", "bad %s: %s" % (what, e))


def _parse_interactions(body: dict, width: int, height: int) -> list[Click]:
    """Clicks plus rasterized strokes, all bounds-checked."""
    clicks: list[Click] = []
    try:
        for obj in body.get("clicks", []):
            clicks.append(Click.from_json(obj))
        for obj in body.get("strokes", []):
            stroke = Stroke.from_json(obj)
            clicks.extend(rasterize_stroke(stroke, STROKE_SPACING))
    except (KeyError, TypeError, ValueError) as e:
        raise ApiError("bad_request", "bad interaction payload: %s" % e)
    if not clicks:
        raise ApiError("bad_request", "no clicks or strokes given")
    for c in clicks:
        if not (0 <= c.x < width and 0 <= c.y < height):
            raise ApiError("bad_request",
                           "click (%d, %d) out of bounds" % (c.x, c.y))
    return clicks


def _session_state(s: Session, gt: BinaryMask | None) -> dict:
    state = {
        "session_id": s.id,
        "width": s.image.width,
        "height": s.image.height,
        "step_count": s.steps,
        "clicks": [[c.to_json() for c in group] for group in s.click_history],
        "soft_clicks": [c.to_json() for c in s.soft_clicks],
        "backend": s.backend.to_json(),
        "use_prior_mask": s.use_prior_mask,
        "mask": _mask_json(s.current_mask),
        "gt_registered": gt is not None,
    }
    if gt is not None:
        state["iou_hint"] = iou(s.current_mask, gt)
    return state


def _locked(store: _Store, key: str):
    lock = store.lock_for(key)
    if not lock.acquire(blocking=False):
        raise ApiError("conflict", "another interaction is in flight")
    return lock


def create_app(data_dir: str | None = None,
               static_dir: str | None = None) -> FastAPI:
    """Build the service app rooted at the given data directory."""
    store = _Store(resolve_data_dir(data_dir))
    app = FastAPI(title="clickseg", openapi_url=None)
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.http_status,
                            content=exc.to_json())

    @app.exception_handler(Exception)
    async def _internal(request: Request, exc: Exception):
        return JSONResponse(status_code=500,
                            content={"code": "internal",
                                     "message": str(exc)})

    @app.get("/v1/health")
    def health():
        return {"status": "ok"}

    @app.post("/v1/sessions")
    async def create_session(request: Request):
        body = await _json_body(request)
        try:
            image = read_ppm(base64.b64decode(_require(body, "image"),
                                              validate=True))
        except (binascii.Error, ValueError) as e:
            raise ApiError("bad_request", "bad image: %s" % e)
        try:
            backend = BackendSpec.from_json(_require(body, "backend"))
            encoding = (EncodingConfig.from_json(body["encoding"])
                        if "encoding" in body else None)
            crf = (CrfParams.from_json(body["crf"])
                   if "crf" in body else None)
            soft = tuple(Click.from_json(c)
                         for c in body.get("soft_clicks", []))
        except (KeyError, TypeError, ValueError) as e:
            raise ApiError("bad_request", "bad config: %s" % e)
        initial = None
        if "initial_mask" in body:
            initial = _mask_from_json(body["initial_mask"], "initial_mask")
            if (initial.width, initial.height) != (image.width, image.height):
                raise ApiError("bad_request",
                               "initial mask dimensions differ from image")
        try:
            s = new_session(image, backend, encoding=encoding, crf=crf,
                            initial_mask=initial, soft_clicks=soft,
                            use_prior_mask=bool(
                                body.get("use_prior_mask", True)))
        except ValueError as e:
            raise ApiError("bad_request", str(e))
        store.put_session(s)
        if "gt" in body:
            gt = _mask_from_json(body["gt"], "gt")
            if (gt.width, gt.height) != (image.width, image.height):
                raise ApiError("bad_request",
                               "gt dimensions differ from image")
            store.put_session_gt(s.id, gt)
        return {"session_id": s.id}

    @app.get("/v1/sessions/{sid}")
    def get_session(sid: str):
        s = store.get_session(sid)
        return _session_state(s, store.session_gt(sid))

    @app.post("/v1/sessions/{sid}/interactions")
    async def post_interactions(sid: str, request: Request):
        body = await _json_body(request)
        store.get_session(sid)  # 404 before 409
        lock = _locked(store, "session:" + sid)
        try:
            s = store.get_session(sid)  # re-read under the lock
            clicks = _parse_interactions(body, s.image.width, s.image.height)
            try:
                s2, mask = refine_step(s, clicks)
            except ValueError as e:
                raise ApiError("bad_request", str(e))
            store.put_session(s2)
        finally:
            lock.release()
        out = {"mask": _mask_json(mask), "step": s2.steps}
        gt = store.session_gt(sid)
        if gt is not None:
            out["iou_hint"] = iou(mask, gt)
        return out

    @app.post("/v1/sessions/{sid}/undo")
    def post_undo(sid: str):
        store.get_session(sid)  # 404 before 409
        lock = _locked(store, "session:" + sid)
        try:
            s = store.get_session(sid)  # re-read under the lock
            try:
                s2 = undo(s)
            except ValueError as e:
                raise ApiError("conflict", str(e))
            store.put_session(s2)
        finally:
            lock.release()
        out = {"mask": _mask_json(s2.current_mask), "step": s2.steps}
        gt = store.session_gt(sid)
        if gt is not None:
            out["iou_hint"] = iou(s2.current_mask, gt)
        return out

    @app.post("/v1/sequences")
    async def create_sequence(request: Request):
        form = await request.form()
        frames = []
        for key, value in form.multi_items():
            if key != "frames":
                continue
            if not isinstance(value, UploadFile):
                raise ApiError("bad_request",
                               "frames must be file uploads")
            try:
                frames.append(read_ppm(await value.read()))
            except ValueError as e:
                raise ApiError("bad_request", "bad frame %r: %s"
                               % (value.filename, e))
        if not frames:
            raise ApiError("bad_request", "no frames uploaded")
        try:
            temporal_weight = float(form.get("temporal_weight", 2.0))
        except ValueError as e:
            raise ApiError("bad_request", "bad temporal_weight: %s" % e)
        placeholder = new_session(frames[0], BackendSpec("color_model"))
        seq = new_sequence(frames, placeholder,
                           temporal_weight=temporal_weight)
        store.put_sequence(seq)
        return {"sequence_id": seq.id}

    @app.post("/v1/sequences/{qid}/first-frame/{sid}")
    def attach_first_frame(qid: str, sid: str):
        store.get_sequence(qid)  # 404 before 409
        s = store.get_session(sid)
        lock = _locked(store, "sequence:" + qid)
        try:
            seq = store.get_sequence(qid)  # re-read under the lock
            f0 = seq.frames[0]
            if (s.image.width, s.image.height) != (f0.width, f0.height):
                raise ApiError("bad_request",
                               "session image differs from the first frame")
            store.put_sequence(replace(seq, first_frame_session=s))
        finally:
            lock.release()
        return {"sequence_id": qid, "first_frame_session": sid}

    @app.post("/v1/sequences/{qid}/propagate")
    def propagate(qid: str):
        store.get_sequence(qid)  # 404 before 409
        lock = _locked(store, "sequence:" + qid)
        try:
            seq = store.get_sequence(qid)  # re-read under the lock
            try:
                seq2 = segment_sequence(seq)
            except ValueError as e:
                raise ApiError("bad_request", str(e))
            store.put_sequence(seq2)
        finally:
            lock.release()
        return {"masks": [_mask_json(m) for m in seq2.masks]}

    @app.get("/v1/sequences/{qid}/worst-frame")
    def get_worst_frame(qid: str):
        seq = store.get_sequence(qid)
        try:
            t = worst_frame(seq)
            score = frame_scores(seq)[t]
        except ValueError as e:
            raise ApiError("bad_request", str(e))
        return {"index": t, "score": score}

    @app.post("/v1/sequences/{qid}/frames/{t}/interactions")
    async def correct_frame(qid: str, t: int, request: Request):
        body = await _json_body(request)
        store.get_sequence(qid)  # 404 before 409
        lock = _locked(store, "sequence:" + qid)
        try:
            seq = store.get_sequence(qid)  # re-read under the lock
            if not (0 <= t < len(seq.frames)):
                raise ApiError("not_found", "no frame %d" % t)
            frame = seq.frames[t]
            clicks = _parse_interactions(body, frame.width, frame.height)
            try:
                seq2 = refine_frame(seq, t, clicks,
                                    repropagate=bool(
                                        body.get("repropagate", False)))
            except ValueError as e:
                raise ApiError("bad_request", str(e))
            store.put_sequence(seq2)
        finally:
            lock.release()
        return {"mask": _mask_json(seq2.masks[t]), "frame": t}

    static = static_dir or os.environ.get(STATIC_DIR_ENV) or _default_static()
    if static and os.path.isdir(static):
        app.mount("/", StaticFiles(directory=static, html=True),
                  name="static")
    return app


def _default_static() -> str | None:
    here = os.path.dirname(os.path.abspath(__file__))
    candidate = os.path.normpath(
        os.path.join(here, "..", "..", "frontend", "dist"))
    return candidate if os.path.isdir(candidate) else None


def _require(body: dict, key: str):
    if key not in body:
        raise ApiError("bad_request", "missing field %r" % key)
    return body[key]


async def _json_body(request: Request) -> dict:
    try:
        body = await request.json()
    except Exception:
        raise ApiError("bad_request", "body must be a JSON object")
    if not isinstance(body, dict):
        raise ApiError("bad_request", "body must be a JSON object")
    return body
