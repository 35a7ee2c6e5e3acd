/**
 * Canvas-side session state: the image bitmap, the decoded overlay mask,
 * the view transform, locally queued interactions, and the polarity mode.
 *
 * Two invariants are enforced here rather than left to callers:
 *   - an overlay only ever has the image's dimensions;
 *   - pending interactions are cleared once a post succeeds.
 * The overlay is always a decode of the most recent server response; the
 * client never edits mask pixels itself.
 */

import type { ClickJson, Polarity, StrokeJson } from "./api.js";
import { decodeRle, type MaskBuffer, type RleJson } from "./rle.js";
import { identityTransform, type ViewTransform } from "./transform.js";

/** One locally queued input, already mapped to image pixels. */
export type PendingInteraction =
  | { kind: "click"; click: ClickJson }
  | { kind: "stroke"; stroke: StrokeJson }
  | { kind: "undo" };

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

/**
 * Image pixels as flat RGB bytes, row-major.  A restored session has no
 * bitmap (the service stores masks, not retrievable pixels), so this may
 * be null while the overlay is not.
 */
export interface Bitmap {
  width: number;
  height: number;
  rgb: Uint8ClampedArray;
}

export class CanvasState {
  readonly width: number;
  readonly height: number;
  bitmap: Bitmap | null;
  overlay: MaskBuffer | null = null;
  transform: ViewTransform = identityTransform();
  pending: PendingInteraction[] = [];
  polarity: Polarity = "pos";
  /** Click groups already applied by the server, for marker display. */
  clickHistory: ClickJson[][] = [];
  step = 0;
  iouHint: number | null = null;

  constructor(width: number, height: number, bitmap: Bitmap | null = null) {
    if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
      throw new Error(`invalid canvas dimensions ${width}x${height}`);
    }
    if (bitmap && (bitmap.width !== width || bitmap.height !== height)) {
      throw new Error(
        `bitmap is ${bitmap.width}x${bitmap.height}, canvas is ${width}x${height}`,
      );
    }
    this.width = width;
    this.height = height;
    this.bitmap = bitmap;
  }

  /**
   * Replace the overlay with a decode of a server RLE.  Rejects masks
   * whose dimensions differ from the image's.
   */
  setOverlayFromRle(rle: RleJson): void {
    const mask = decodeRle(rle);
    if (mask.width !== this.width || mask.height !== this.height) {
      throw new Error(
        `mask is ${mask.width}x${mask.height}, image is ${this.width}x${this.height}`,
      );
    }
    this.overlay = mask;
  }

  /** Remove the given interactions from the pending queue (post landed). */
  clearPending(sent: PendingInteraction[]): void {
    const gone = new Set(sent);
    this.pending = this.pending.filter((p) => !gone.has(p));
  }
}

export function bitmapToPpm(bitmap: Bitmap): Uint8Array {
  const header = `P6\n${bitmap.width} ${bitmap.height}\n255\n`;
  const head = new TextEncoder().encode(header);
  const out = new Uint8Array(head.length + bitmap.rgb.length);
  out.set(head, 0);
  out.set(bitmap.rgb, head.length);
  return out;
}

export function base64OfBytes(bytes: Uint8Array): string {
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(binary);
}
