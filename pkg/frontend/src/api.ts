/**
 * Typed client for the segmentation service's /v1 JSON API.
 *
 * This is the browser's only channel to the engine: every mask shown in
 * the UI arrives through these calls, and nothing is segmented client
 * side.
 */

import type { RleJson } from "./rle.js";

export type Polarity = "pos" | "neg";

export interface ClickJson {
  x: number;
  y: number;
  polarity: Polarity;
}

export interface StrokeJson {
  /** Raw polyline in image-pixel coordinates; the server rasterizes it. */
  points: [number, number][];
  polarity: Polarity;
}

export interface InteractionBody {
  clicks?: ClickJson[];
  strokes?: StrokeJson[];
}

export interface BackendSpecJson {
  kind: string;
  params?: Record<string, unknown>;
}

export interface CreateSessionBody {
  /** Base64-encoded binary PPM (P6) image. */
  image: string;
  backend: BackendSpecJson;
  crf?: Record<string, number>;
  encoding?: Record<string, number>;
  soft_clicks?: boolean;
  initial_mask?: RleJson;
  use_prior_mask?: boolean;
  /** Registering a ground truth makes responses carry `iou_hint`. */
  gt?: RleJson;
}

export interface StepResponse {
  mask: RleJson;
  step: number;
  iou_hint?: number;
}

export interface SessionState {
  session_id: string;
  width: number;
  height: number;
  step_count: number;
  clicks: ClickJson[][];
  soft_clicks: boolean;
  backend: BackendSpecJson;
  use_prior_mask: boolean;
  mask: RleJson;
  gt_registered: boolean;
  iou_hint?: number;
}

export interface WorstFrame {
  index: number;
  score: number;
}

export interface FrameStepResponse {
  mask: RleJson;
  frame: number;
}

/** Error payloads are `{code, message}` with code from a fixed set. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raiseForStatus(res: Response): Promise<void> {
  if (res.ok) return;
  let code = "internal";
  let message = `${res.status} ${res.statusText}`;
  try {
    const body = (await res.json()) as { code?: string; message?: string };
    if (typeof body.code === "string") code = body.code;
    if (typeof body.message === "string") message = body.message;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(res.status, code, message);
}

export class Api {
  constructor(
    private readonly base = "",
    private readonly fetchImpl: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  private async requestJson(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<unknown> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchImpl(this.base + path, init);
    await raiseForStatus(res);
    return res.json();
  }

  async health(): Promise<{ status: string }> {
    return (await this.requestJson("GET", "/v1/health")) as { status: string };
  }

  async createSession(body: CreateSessionBody): Promise<string> {
    const out = (await this.requestJson("POST", "/v1/sessions", body)) as {
      session_id: string;
    };
    return out.session_id;
  }

  async getSession(sid: string): Promise<SessionState> {
    return (await this.requestJson(
      "GET",
      `/v1/sessions/${encodeURIComponent(sid)}`,
    )) as SessionState;
  }

  async interact(sid: string, body: InteractionBody): Promise<StepResponse> {
    return (await this.requestJson(
      "POST",
      `/v1/sessions/${encodeURIComponent(sid)}/interactions`,
      body,
    )) as StepResponse;
  }

  async undo(sid: string): Promise<StepResponse> {
    return (await this.requestJson(
      "POST",
      `/v1/sessions/${encodeURIComponent(sid)}/undo`,
    )) as StepResponse;
  }

  /** Upload PPM frames as multipart files under the `frames` field. */
  async createSequence(
    frames: Uint8Array[],
    temporalWeight?: number,
  ): Promise<string> {
    const form = new FormData();
    frames.forEach((bytes, i) => {
      // copy into a fresh ArrayBuffer-backed view for the Blob
      form.append(
        "frames",
        new Blob([new Uint8Array(bytes)], { type: "image/x-portable-pixmap" }),
        `frame_${String(i).padStart(4, "0")}.ppm`,
      );
    });
    if (temporalWeight !== undefined) {
      form.append("temporal_weight", String(temporalWeight));
    }
    const res = await this.fetchImpl(this.base + "/v1/sequences", {
      method: "POST",
      body: form,
    });
    await raiseForStatus(res);
    const out = (await res.json()) as { sequence_id: string };
    return out.sequence_id;
  }

  async attachFirstFrame(qid: string, sid: string): Promise<void> {
    await this.requestJson(
      "POST",
      `/v1/sequences/${encodeURIComponent(qid)}/first-frame/${encodeURIComponent(sid)}`,
    );
  }

  async propagate(qid: string): Promise<RleJson[]> {
    const out = (await this.requestJson(
      "POST",
      `/v1/sequences/${encodeURIComponent(qid)}/propagate`,
    )) as { masks: RleJson[] };
    return out.masks;
  }

  async worstFrame(qid: string): Promise<WorstFrame> {
    return (await this.requestJson(
      "GET",
      `/v1/sequences/${encodeURIComponent(qid)}/worst-frame`,
    )) as WorstFrame;
  }

  async correctFrame(
    qid: string,
    frame: number,
    body: InteractionBody & { repropagate?: boolean },
  ): Promise<FrameStepResponse> {
    return (await this.requestJson(
      "POST",
      `/v1/sequences/${encodeURIComponent(qid)}/frames/${frame}/interactions`,
      body,
    )) as FrameStepResponse;
  }
}
