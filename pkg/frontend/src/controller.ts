/**
 * Orchestration between pointer input and the /v1 API.
 *
 * Concurrency model: at most one interaction request is in flight per
 * session.  Input arriving while a request is pending queues locally and
 * is flushed (merged into one post) when the response lands.  A 409
 * conflict is retried once; every other API failure surfaces as a
 * dismissible banner.
 */

import {
  Api,
  ApiError,
  type ClickJson,
  type InteractionBody,
  type Polarity,
  type StrokeJson,
} from "./api.js";
import { decodeRle, type MaskBuffer, type RleJson } from "./rle.js";
import { CanvasState, type PendingInteraction } from "./state.js";
import { mapPointerToPixel, OUT_OF_BOUNDS } from "./transform.js";

export interface Banner {
  id: number;
  text: string;
}

/** Shared list of dismissible error banners. */
export class BannerLog {
  banners: Banner[] = [];
  private nextId = 1;
  onChange: () => void = () => {};

  push(text: string): void {
    this.banners.push({ id: this.nextId++, text });
    this.onChange();
  }

  dismiss(id: number): void {
    this.banners = this.banners.filter((b) => b.id !== id);
    this.onChange();
  }
}

async function withConflictRetry<T>(call: () => Promise<T>): Promise<T> {
  try {
    return await call();
  } catch (e) {
    if (e instanceof ApiError && e.code === "conflict") {
      return await call();
    }
    throw e;
  }
}

/** Drive one segmentation session: map input, queue, post, apply masks. */
export class SessionController {
  readonly state: CanvasState;
  onChange: () => void = () => {};
  private inFlight = false;

  constructor(
    private readonly api: Api,
    readonly sessionId: string,
    state: CanvasState,
    readonly banners: BannerLog,
  ) {
    this.state = state;
  }

  get busy(): boolean {
    return this.inFlight || this.state.pending.length > 0;
  }

  private effectivePolarity(forceNegative: boolean): Polarity {
    if (forceNegative) return this.state.polarity === "neg" ? "pos" : "neg";
    return this.state.polarity;
  }

  /**
   * Handle a click at viewport coordinates.  Out-of-bounds positions are
   * dropped here, before anything is queued: no out-of-bounds coordinate
   * is ever posted.  Returns true when the click was accepted.
   */
  clickAt(vx: number, vy: number, forceNegative = false): boolean {
    const hit = mapPointerToPixel(vx, vy, this.state.transform, this.state.width, this.state.height);
    if (hit === OUT_OF_BOUNDS) return false;
    const click: ClickJson = {
      x: hit.x,
      y: hit.y,
      polarity: this.effectivePolarity(forceNegative),
    };
    this.state.pending.push({ kind: "click", click });
    this.onChange();
    void this.pump();
    return true;
  }

  /**
   * Handle a drag given as viewport polyline points.  Points are mapped
   * to pixels, out-of-bounds points dropped, and consecutive duplicates
   * collapsed.  Two or more surviving points post a stroke; exactly one
   * degrades to a click; zero is ignored.
   */
  strokeAt(viewportPoints: [number, number][], forceNegative = false): boolean {
    const pixels: [number, number][] = [];
    for (const [vx, vy] of viewportPoints) {
      const hit = mapPointerToPixel(vx, vy, this.state.transform, this.state.width, this.state.height);
      if (hit === OUT_OF_BOUNDS) continue;
      const last = pixels[pixels.length - 1];
      if (last && last[0] === hit.x && last[1] === hit.y) continue;
      pixels.push([hit.x, hit.y]);
    }
    if (pixels.length === 0) return false;
    const polarity = this.effectivePolarity(forceNegative);
    if (pixels.length === 1) {
      this.state.pending.push({
        kind: "click",
        click: { x: pixels[0][0], y: pixels[0][1], polarity },
      });
    } else {
      this.state.pending.push({ kind: "stroke", stroke: { points: pixels, polarity } });
    }
    this.onChange();
    void this.pump();
    return true;
  }

  /** Queue a click given directly in image-pixel coordinates. */
  clickPixel(x: number, y: number, polarity?: Polarity): boolean {
    if (!Number.isInteger(x) || !Number.isInteger(y)) return false;
    if (x < 0 || y < 0 || x >= this.state.width || y >= this.state.height) {
      return false;
    }
    this.state.pending.push({
      kind: "click",
      click: { x, y, polarity: polarity ?? this.state.polarity },
    });
    this.onChange();
    void this.pump();
    return true;
  }

  undo(): void {
    this.state.pending.push({ kind: "undo" });
    this.onChange();
    void this.pump();
  }

  /** Resolve once the queue is empty and nothing is in flight. */
  async flush(): Promise<void> {
    while (this.inFlight || this.state.pending.length > 0) {
      await new Promise((resolve) => setTimeout(resolve, 0));
    }
  }

  /** Restore step count, click history, and overlay from a server state. */
  async refreshFromServer(): Promise<void> {
    try {
      const s = await this.api.getSession(this.sessionId);
      this.state.step = s.step_count;
      this.state.clickHistory = s.clicks;
      this.state.iouHint = s.iou_hint ?? null;
      this.state.setOverlayFromRle(s.mask);
    } catch (e) {
      this.banners.push(messageOf(e));
    }
    this.onChange();
  }

  /**
   * Send queued interactions, one request at a time.  Consecutive clicks
   * and strokes merge into a single post; undo is its own request.
   */
  private async pump(): Promise<void> {
    if (this.inFlight) return;
    const batch = this.takeBatch();
    if (batch.length === 0) return;
    this.inFlight = true;
    try {
      if (batch[0].kind === "undo") {
        const res = await withConflictRetry(() => this.api.undo(this.sessionId));
        this.applyStep(res.mask, res.step, res.iou_hint);
        this.state.clickHistory = this.state.clickHistory.slice(0, res.step);
      } else {
        const body: InteractionBody = { clicks: [], strokes: [] };
        const applied: ClickJson[] = [];
        for (const op of batch) {
          if (op.kind === "click") {
            body.clicks!.push(op.click);
            applied.push(op.click);
          } else if (op.kind === "stroke") {
            body.strokes!.push(op.stroke);
          }
        }
        const res = await withConflictRetry(() => this.api.interact(this.sessionId, body));
        this.applyStep(res.mask, res.step, res.iou_hint);
        this.state.clickHistory.push(applied);
      }
    } catch (e) {
      this.banners.push(messageOf(e));
    } finally {
      this.state.clearPending(batch);
      this.inFlight = false;
      this.onChange();
      if (this.state.pending.length > 0) void this.pump();
    }
  }

  /** Longest leading run of same-kind ops: interactions merge, undo is solo. */
  private takeBatch(): PendingInteraction[] {
    const queue = this.state.pending;
    if (queue.length === 0) return [];
    if (queue[0].kind === "undo") return [queue[0]];
    const batch: PendingInteraction[] = [];
    for (const op of queue) {
      if (op.kind === "undo") break;
      batch.push(op);
    }
    return batch;
  }

  private applyStep(mask: RleJson, step: number, iouHint?: number): void {
    this.state.setOverlayFromRle(mask);
    this.state.step = step;
    this.state.iouHint = iouHint ?? null;
  }
}

/** Drive one frame sequence: upload, propagate, scrub, correct. */
export class SequenceController {
  sequenceId: string | null = null;
  masks: (MaskBuffer | null)[] = [];
  current = 0;
  frameCount = 0;
  worst: { index: number; score: number } | null = null;
  onChange: () => void = () => {};
  private inFlight = false;

  constructor(
    private readonly api: Api,
    readonly banners: BannerLog,
  ) {}

  get busy(): boolean {
    return this.inFlight;
  }

  private async run<T>(call: () => Promise<T>): Promise<T | null> {
    if (this.inFlight) return null;
    this.inFlight = true;
    try {
      return await withConflictRetry(call);
    } catch (e) {
      this.banners.push(messageOf(e));
      return null;
    } finally {
      this.inFlight = false;
      this.onChange();
    }
  }

  async create(frames: Uint8Array[], temporalWeight?: number): Promise<void> {
    const qid = await this.run(() => this.api.createSequence(frames, temporalWeight));
    if (qid !== null) {
      this.sequenceId = qid;
      this.frameCount = frames.length;
      this.masks = new Array(frames.length).fill(null);
      this.current = 0;
      this.worst = null;
    }
    this.onChange();
  }

  async attachFirstFrame(sid: string): Promise<void> {
    if (!this.sequenceId) return;
    const qid = this.sequenceId;
    await this.run(() => this.api.attachFirstFrame(qid, sid));
  }

  async propagate(): Promise<void> {
    if (!this.sequenceId) return;
    const qid = this.sequenceId;
    const masks = await this.run(() => this.api.propagate(qid));
    if (masks !== null) {
      this.masks = masks.map((m) => decodeRle(m));
      this.worst = null;
    }
    this.onChange();
  }

  async jumpToWorst(): Promise<void> {
    if (!this.sequenceId) return;
    const qid = this.sequenceId;
    const worst = await this.run(() => this.api.worstFrame(qid));
    if (worst !== null) {
      this.worst = worst;
      this.current = worst.index;
    }
    this.onChange();
  }

  /**
   * Post correction clicks for the current frame (pixels pre-mapped).
   * With `repropagate` the server recomputes every frame past this one
   * but returns only the corrected frame's mask, so the later overlays
   * are cleared as stale rather than shown out of date.
   */
  async correct(
    clicks: ClickJson[],
    strokes: StrokeJson[],
    repropagate: boolean,
  ): Promise<void> {
    if (!this.sequenceId || (clicks.length === 0 && strokes.length === 0)) return;
    const qid = this.sequenceId;
    const frame = this.current;
    const body = repropagate
      ? { clicks, strokes, repropagate: true }
      : { clicks, strokes };
    const res = await this.run(() => this.api.correctFrame(qid, frame, body));
    if (res !== null) {
      this.masks[res.frame] = decodeRle(res.mask);
      if (repropagate) {
        for (let i = res.frame + 1; i < this.masks.length; i++) this.masks[i] = null;
      }
    }
    this.onChange();
  }

  scrubTo(index: number): void {
    if (this.frameCount === 0) return;
    this.current = Math.min(Math.max(0, index), this.frameCount - 1);
    this.onChange();
  }
}

function messageOf(e: unknown): string {
  if (e instanceof ApiError) return `${e.code}: ${e.message}`;
  return e instanceof Error ? e.message : String(e);
}
