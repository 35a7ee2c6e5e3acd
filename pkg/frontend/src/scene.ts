/**
 * Client-side demo scenes: a two-tone image with an elliptical object,
 * plus translated variants for a demo frame sequence.  These exist so
 * the UI can be exercised with one button press and no uploads; the
 * payloads they build (base64 PPM, ground-truth RLE) go through the
 * same /v1 API as user-provided data.
 */

import { encodeRle, type RleJson } from "./rle.js";
import type { Bitmap } from "./state.js";

export interface DemoScene {
  bitmap: Bitmap;
  gt: RleJson;
}

const FG = { r: 214, g: 88, b: 58 };
const BG = { r: 38, g: 108, b: 190 };

/**
 * A two-tone scene with an ellipse centered at (cx, cy).  The default
 * center places the object slightly off-center so clicks on the middle
 * of the canvas are not accidentally correct.
 */
export function demoScene(
  width = 64,
  height = 48,
  shiftX = 0,
): DemoScene {
  const cx = width * 0.45 + shiftX;
  const cy = height * 0.52;
  const rx = width * 0.22;
  const ry = height * 0.28;
  const rgb = new Uint8ClampedArray(width * height * 3);
  const mask = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const dx = (x - cx) / rx;
      const dy = (y - cy) / ry;
      const inside = dx * dx + dy * dy <= 1;
      const i = y * width + x;
      mask[i] = inside ? 1 : 0;
      const c = inside ? FG : BG;
      rgb[3 * i] = c.r;
      rgb[3 * i + 1] = c.g;
      rgb[3 * i + 2] = c.b;
    }
  }
  return {
    bitmap: { width, height, rgb },
    gt: encodeRle({ width, height, data: mask }),
  };
}

/** A short sequence in which the demo object drifts rightward. */
export function demoSequence(
  nFrames = 6,
  width = 64,
  height = 48,
  step = 2,
): DemoScene[] {
  const frames: DemoScene[] = [];
  for (let t = 0; t < nFrames; t++) {
    frames.push(demoScene(width, height, t * step));
  }
  return frames;
}

/** A point comfortably inside the demo object (its center). */
export function demoObjectCenter(width = 64, height = 48, shiftX = 0): {
  x: number;
  y: number;
} {
  return { x: Math.round(width * 0.45 + shiftX), y: Math.round(height * 0.52) };
}
