/**
 * Browser application: wires pointer input, toolbar controls, and the
 * sequence panel to the /v1 API through the session/sequence controllers.
 *
 * The app keeps no authoritative state of its own: masks always come
 * from server responses, and a reload restores what the service knows
 * about the session named in the URL hash.
 */

import { Api, type CreateSessionBody, type Polarity } from "./api.js";
import { BannerLog, SequenceController, SessionController } from "./controller.js";
import { paint } from "./overlay.js";
import { demoObjectCenter, demoScene, demoSequence } from "./scene.js";
import {
  base64OfBytes,
  bitmapToPpm,
  CanvasState,
  type Bitmap,
} from "./state.js";
import { identityTransform, zoomAround, type ViewTransform } from "./transform.js";

const MIN_SCALE = 1;
const MAX_SCALE = 32;

/** Initial zoom: make small demo images comfortably large. */
export function fitScale(width: number, target = 560): number {
  const s = Math.floor(target / Math.max(1, width));
  return Math.min(MAX_SCALE, Math.max(MIN_SCALE, s));
}

export interface App {
  readonly api: Api;
  readonly banners: BannerLog;
  readonly canvas: HTMLCanvasElement;
  readonly seqCanvas: HTMLCanvasElement;
  session: SessionController | null;
  sequence: SequenceController;
  newDemoSession(kind: "oracle" | "color_model"): Promise<void>;
  restoreSession(sid: string): Promise<void>;
  newDemoSequence(): Promise<void>;
  render(): void;
}

interface DragTrack {
  points: [number, number][];
  forceNegative: boolean;
}

const DRAG_THRESHOLD_PX = 4;

export function initApp(root: HTMLElement, api: Api): App {
  root.innerHTML = `
    <header>
      <h1>clickseg</h1>
      <span id="session-label">no session</span>
    </header>
    <div id="banners"></div>
    <div class="toolbar">
      <button id="new-demo-oracle">New demo (oracle)</button>
      <button id="new-demo-color">New demo (color model)</button>
      <label class="file-button">Open image…<input id="file-input" type="file" accept="image/*"></label>
      <button id="polarity-toggle" title="Shift-click or right-click for the opposite polarity">mode: positive</button>
      <button id="undo">Undo</button>
      <button id="zoom-in">Zoom +</button>
      <button id="zoom-out">Zoom −</button>
      <span id="status"></span>
    </div>
    <div class="canvas-wrap"><canvas id="canvas" width="1" height="1"></canvas></div>
    <section class="sequence">
      <h2>Sequence</h2>
      <div class="toolbar">
        <button id="seq-demo">Demo sequence</button>
        <label class="file-button">Open frames…<input id="seq-files" type="file" accept="image/*" multiple></label>
        <button id="seq-attach">Attach current session</button>
        <button id="seq-propagate">Propagate</button>
        <button id="seq-worst">Jump to worst frame</button>
        <label><input id="repropagate" type="checkbox"> repropagate after correction</label>
      </div>
      <div class="toolbar">
        <input id="seq-scrub" type="range" min="0" max="0" value="0" disabled>
        <span id="seq-label">no sequence</span>
      </div>
      <div class="canvas-wrap"><canvas id="seq-canvas" width="1" height="1"></canvas></div>
    </section>
  `;

  const el = <T extends HTMLElement>(id: string): T => {
    const node = root.querySelector(`#${id}`);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
  };

  const canvas = el<HTMLCanvasElement>("canvas");
  const seqCanvas = el<HTMLCanvasElement>("seq-canvas");
  const bannersDiv = el<HTMLDivElement>("banners");
  const sessionLabel = el<HTMLSpanElement>("session-label");
  const statusSpan = el<HTMLSpanElement>("status");
  const polarityButton = el<HTMLButtonElement>("polarity-toggle");
  const scrub = el<HTMLInputElement>("seq-scrub");
  const seqLabel = el<HTMLSpanElement>("seq-label");
  const repropagateBox = el<HTMLInputElement>("repropagate");

  const banners = new BannerLog();
  const sequence = new SequenceController(api, banners);
  let seqFrames: Bitmap[] = [];
  let seqTransform: ViewTransform = identityTransform();

  const app: App = {
    api,
    banners,
    canvas,
    seqCanvas,
    session: null,
    sequence,
    newDemoSession,
    restoreSession,
    newDemoSequence,
    render,
  };

  function render(): void {
    // banners
    bannersDiv.innerHTML = "";
    for (const b of banners.banners) {
      const div = document.createElement("div");
      div.className = "banner";
      const text = document.createElement("span");
      text.textContent = b.text;
      const dismiss = document.createElement("button");
      dismiss.textContent = "dismiss";
      dismiss.addEventListener("click", () => banners.dismiss(b.id));
      div.append(text, dismiss);
      bannersDiv.append(div);
    }
    // session header + canvas
    const s = app.session;
    if (s) {
      const iou =
        s.state.iouHint === null ? "" : ` · IOU ${s.state.iouHint.toFixed(3)}`;
      sessionLabel.textContent = `session ${s.sessionId.slice(0, 8)} · step ${s.state.step}${iou}`;
      statusSpan.textContent = s.busy ? "working…" : "";
      paint(canvas, {
        width: s.state.width,
        height: s.state.height,
        bitmap: s.state.bitmap,
        overlay: s.state.overlay,
        transform: s.state.transform,
        clicks: s.state.clickHistory.flat().concat(
          s.state.pending.flatMap((p) => (p.kind === "click" ? [p.click] : [])),
        ),
      });
    } else {
      sessionLabel.textContent = "no session";
      statusSpan.textContent = "";
    }
    polarityButton.textContent = `mode: ${polarity() === "pos" ? "positive" : "negative"}`;
    // sequence panel
    if (sequence.frameCount > 0) {
      scrub.disabled = false;
      scrub.max = String(sequence.frameCount - 1);
      scrub.value = String(sequence.current);
      const worst = sequence.worst
        ? ` · worst ${sequence.worst.index} (${sequence.worst.score.toFixed(3)})`
        : "";
      const busy = sequence.busy ? " · working…" : "";
      seqLabel.textContent = `frame ${sequence.current + 1}/${sequence.frameCount}${worst}${busy}`;
      const frame = seqFrames[sequence.current] ?? null;
      const mask = sequence.masks[sequence.current] ?? null;
      if (frame) {
        paint(seqCanvas, {
          width: frame.width,
          height: frame.height,
          bitmap: frame,
          overlay: mask,
          transform: seqTransform,
          clicks: [],
        });
      }
    } else {
      scrub.disabled = true;
      seqLabel.textContent = "no sequence";
    }
  }

  function polarity(): Polarity {
    return app.session ? app.session.state.polarity : "pos";
  }

  async function createSession(
    bitmap: Bitmap,
    body: CreateSessionBody,
  ): Promise<void> {
    try {
      const sid = await api.createSession(body);
      adoptSession(sid, new CanvasState(bitmap.width, bitmap.height, bitmap));
      await app.session!.refreshFromServer();
      if (typeof location !== "undefined") location.hash = `s=${sid}`;
    } catch (e) {
      banners.push(e instanceof Error ? e.message : String(e));
      render();
    }
  }

  function adoptSession(sid: string, state: CanvasState): void {
    state.transform = { scale: fitScale(state.width), tx: 0, ty: 0 };
    const controller = new SessionController(api, sid, state, banners);
    controller.onChange = render;
    app.session = controller;
    render();
  }

  async function newDemoSession(kind: "oracle" | "color_model"): Promise<void> {
    const scene = demoScene();
    await createSession(scene.bitmap, {
      image: base64OfBytes(bitmapToPpm(scene.bitmap)),
      backend:
        kind === "oracle"
          ? { kind: "oracle", params: { gt: scene.gt } }
          : { kind: "color_model", params: {} },
      gt: scene.gt,
    });
  }

  async function restoreSession(sid: string): Promise<void> {
    try {
      const remote = await api.getSession(sid);
      // Pixels are not stored server-side; the overlay renders on a
      // neutral ground until the user opens the image again.
      adoptSession(sid, new CanvasState(remote.width, remote.height, null));
      await app.session!.refreshFromServer();
    } catch (e) {
      banners.push(e instanceof Error ? e.message : String(e));
      render();
    }
  }

  async function newDemoSequence(): Promise<void> {
    const scenes = demoSequence();
    const first = scenes[0];
    await createSession(first.bitmap, {
      image: base64OfBytes(bitmapToPpm(first.bitmap)),
      backend: { kind: "oracle", params: { gt: first.gt } },
      gt: first.gt,
    });
    const s = app.session;
    if (!s) return;
    const center = demoObjectCenter();
    s.clickPixel(center.x, center.y, "pos");
    await s.flush();
    seqFrames = scenes.map((sc) => sc.bitmap);
    seqTransform = { scale: fitScale(first.bitmap.width), tx: 0, ty: 0 };
    await sequence.create(scenes.map((sc) => bitmapToPpm(sc.bitmap)));
    if (sequence.sequenceId) await sequence.attachFirstFrame(s.sessionId);
    render();
  }

  // --- pointer input ------------------------------------------------------

  function canvasPoint(target: HTMLCanvasElement, e: MouseEvent): [number, number] {
    const rect = target.getBoundingClientRect();
    return [e.clientX - rect.left, e.clientY - rect.top];
  }

  let drag: DragTrack | null = null;

  canvas.addEventListener("mousedown", (e) => {
    if (!app.session) return;
    drag = {
      points: [canvasPoint(canvas, e)],
      forceNegative: e.shiftKey || e.button === 2,
    };
  });
  canvas.addEventListener("mousemove", (e) => {
    if (drag) drag.points.push(canvasPoint(canvas, e));
  });
  canvas.addEventListener("mouseup", (e) => {
    const s = app.session;
    if (!drag || !s) {
      drag = null;
      return;
    }
    const track = drag;
    drag = null;
    track.points.push(canvasPoint(canvas, e));
    const [x0, y0] = track.points[0];
    const [x1, y1] = track.points[track.points.length - 1];
    const moved = Math.hypot(x1 - x0, y1 - y0);
    if (moved < DRAG_THRESHOLD_PX) {
      s.clickAt(x0, y0, track.forceNegative);
    } else {
      s.strokeAt(track.points, track.forceNegative);
    }
  });
  canvas.addEventListener("mouseleave", () => {
    drag = null;
  });
  canvas.addEventListener("contextmenu", (e) => e.preventDefault());
  canvas.addEventListener("wheel", (e) => {
    const s = app.session;
    if (!s) return;
    e.preventDefault();
    const [cx, cy] = canvasPoint(canvas, e);
    const factor = e.deltaY < 0 ? 1.25 : 0.8;
    const next = Math.min(
      MAX_SCALE,
      Math.max(MIN_SCALE, s.state.transform.scale * factor),
    );
    s.state.transform = zoomAround(s.state.transform, next, cx, cy);
    render();
  });

  seqCanvas.addEventListener("mousedown", (e) => {
    if (sequence.frameCount === 0) return;
    const frame = seqFrames[sequence.current];
    if (!frame) return;
    const [vx, vy] = canvasPoint(seqCanvas, e);
    const x = Math.floor((vx - seqTransform.tx) / seqTransform.scale);
    const y = Math.floor((vy - seqTransform.ty) / seqTransform.scale);
    if (x < 0 || y < 0 || x >= frame.width || y >= frame.height) return;
    const negative = e.shiftKey || e.button === 2;
    const pol: Polarity = negative
      ? polarity() === "neg"
        ? "pos"
        : "neg"
      : polarity();
    void sequence.correct([{ x, y, polarity: pol }], [], repropagateBox.checked);
  });
  seqCanvas.addEventListener("contextmenu", (e) => e.preventDefault());

  // --- toolbar ------------------------------------------------------------

  el<HTMLButtonElement>("new-demo-oracle").addEventListener("click", () => {
    void newDemoSession("oracle");
  });
  el<HTMLButtonElement>("new-demo-color").addEventListener("click", () => {
    void newDemoSession("color_model");
  });
  el<HTMLButtonElement>("polarity-toggle").addEventListener("click", () => {
    const s = app.session;
    if (s) s.state.polarity = s.state.polarity === "pos" ? "neg" : "pos";
    render();
  });
  el<HTMLButtonElement>("undo").addEventListener("click", () => {
    app.session?.undo();
  });
  const zoomBy = (factor: number): void => {
    const s = app.session;
    if (!s) return;
    const next = Math.min(
      MAX_SCALE,
      Math.max(MIN_SCALE, s.state.transform.scale * factor),
    );
    s.state.transform = zoomAround(
      s.state.transform,
      next,
      (s.state.width * s.state.transform.scale) / 2,
      (s.state.height * s.state.transform.scale) / 2,
    );
    render();
  };
  el<HTMLButtonElement>("zoom-in").addEventListener("click", () => zoomBy(2));
  el<HTMLButtonElement>("zoom-out").addEventListener("click", () => zoomBy(0.5));

  el<HTMLInputElement>("file-input").addEventListener("change", (e) => {
    const input = e.target as HTMLInputElement;
    const file = input.files?.[0];
    if (file) void openImageFile(file);
    input.value = "";
  });

  async function decodeToBitmap(file: File): Promise<Bitmap> {
    if (typeof createImageBitmap !== "function") {
      throw new Error("image decoding is unavailable in this browser");
    }
    const im = await createImageBitmap(file);
    const c = document.createElement("canvas");
    c.width = im.width;
    c.height = im.height;
    const ctx = c.getContext("2d");
    if (!ctx) throw new Error("2D canvas unavailable");
    ctx.drawImage(im, 0, 0);
    const data = ctx.getImageData(0, 0, im.width, im.height).data;
    const rgb = new Uint8ClampedArray(im.width * im.height * 3);
    for (let i = 0; i < im.width * im.height; i++) {
      rgb[3 * i] = data[4 * i];
      rgb[3 * i + 1] = data[4 * i + 1];
      rgb[3 * i + 2] = data[4 * i + 2];
    }
    return { width: im.width, height: im.height, rgb };
  }

  async function openImageFile(file: File): Promise<void> {
    try {
      const bitmap = await decodeToBitmap(file);
      await createSession(bitmap, {
        image: base64OfBytes(bitmapToPpm(bitmap)),
        backend: { kind: "color_model", params: {} },
      });
    } catch (err) {
      banners.push(err instanceof Error ? err.message : String(err));
      render();
    }
  }

  // --- sequence panel -------------------------------------------------------

  el<HTMLButtonElement>("seq-demo").addEventListener("click", () => {
    void newDemoSequence();
  });
  el<HTMLInputElement>("seq-files").addEventListener("change", (e) => {
    const input = e.target as HTMLInputElement;
    const files = input.files ? Array.from(input.files) : [];
    if (files.length > 0) void openFrameFiles(files);
    input.value = "";
  });

  async function openFrameFiles(files: File[]): Promise<void> {
    try {
      const bitmaps: Bitmap[] = [];
      for (const f of files) bitmaps.push(await decodeToBitmap(f));
      seqFrames = bitmaps;
      seqTransform = { scale: fitScale(bitmaps[0].width), tx: 0, ty: 0 };
      await sequence.create(bitmaps.map(bitmapToPpm));
    } catch (err) {
      banners.push(err instanceof Error ? err.message : String(err));
      render();
    }
  }

  el<HTMLButtonElement>("seq-attach").addEventListener("click", () => {
    const s = app.session;
    if (s && sequence.sequenceId) void sequence.attachFirstFrame(s.sessionId);
  });
  el<HTMLButtonElement>("seq-propagate").addEventListener("click", () => {
    void sequence.propagate();
  });
  el<HTMLButtonElement>("seq-worst").addEventListener("click", () => {
    void sequence.jumpToWorst();
  });
  scrub.addEventListener("input", () => {
    sequence.scrubTo(Number(scrub.value));
  });

  banners.onChange = render;
  sequence.onChange = render;
  render();

  // reload restore: the URL hash is the only state kept across reloads
  if (typeof location !== "undefined") {
    const match = /(?:^|[#&])s=([0-9a-f]+)/.exec(location.hash);
    if (match) void restoreSession(match[1]);
  }

  return app;
}

// Auto-boot only when loaded by the page's own script tag.
if (
  typeof document !== "undefined" &&
  document.currentScript instanceof HTMLScriptElement &&
  document.currentScript.dataset.autoinit === "1"
) {
  const root = document.getElementById("app");
  if (root) initApp(root, new Api(""));
}
