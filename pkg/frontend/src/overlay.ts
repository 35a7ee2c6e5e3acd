/**
 * Canvas painting: image, mask overlay, and click markers.
 *
 * The overlay is presentational only — a translucent fill over mask
 * pixels plus an outline along the mask contour (mask pixels with at
 * least one non-mask 4-neighbor).  Mask data itself is never modified.
 */

import type { ClickJson } from "./api.js";
import type { MaskBuffer } from "./rle.js";
import type { Bitmap } from "./state.js";
import { pixelToViewport, type ViewTransform } from "./transform.js";

const FILL = { r: 255, g: 64, b: 64, a: 96 };
const CONTOUR = { r: 255, g: 235, b: 59, a: 230 };
const CHECKER = [52, 64];

/** Compose image + overlay into RGBA at native resolution. */
export function composeRgba(
  width: number,
  height: number,
  bitmap: Bitmap | null,
  overlay: MaskBuffer | null,
): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(width * height * 4);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const i = y * width + x;
      let r: number, g: number, b: number;
      if (bitmap) {
        r = bitmap.rgb[3 * i];
        g = bitmap.rgb[3 * i + 1];
        b = bitmap.rgb[3 * i + 2];
      } else {
        // no pixels available (restored session): neutral checkerboard
        const tone = CHECKER[((x >> 2) + (y >> 2)) & 1];
        r = g = b = tone;
      }
      if (overlay && overlay.data[i]) {
        if (isContour(overlay, x, y)) {
          r = CONTOUR.r;
          g = CONTOUR.g;
          b = CONTOUR.b;
        } else {
          const a = FILL.a / 255;
          r = r * (1 - a) + FILL.r * a;
          g = g * (1 - a) + FILL.g * a;
          b = b * (1 - a) + FILL.b * a;
        }
      }
      out[4 * i] = r;
      out[4 * i + 1] = g;
      out[4 * i + 2] = b;
      out[4 * i + 3] = 255;
    }
  }
  return out;
}

function isContour(mask: MaskBuffer, x: number, y: number): boolean {
  const { width, height, data } = mask;
  if (x === 0 || y === 0 || x === width - 1 || y === height - 1) return true;
  return (
    !data[y * width + x - 1] ||
    !data[y * width + x + 1] ||
    !data[(y - 1) * width + x] ||
    !data[(y + 1) * width + x]
  );
}

export interface SceneView {
  width: number;
  height: number;
  bitmap: Bitmap | null;
  overlay: MaskBuffer | null;
  transform: ViewTransform;
  clicks: ClickJson[];
}

/** Repaint a canvas from scene state.  No-op when 2D contexts are unavailable. */
export function paint(canvas: HTMLCanvasElement, view: SceneView): void {
  const { width, height, transform } = view;
  canvas.width = Math.ceil(width * transform.scale + transform.tx);
  canvas.height = Math.ceil(height * transform.scale + transform.ty);
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const rgba = composeRgba(width, height, view.bitmap, view.overlay);
  const source = document.createElement("canvas");
  source.width = width;
  source.height = height;
  const sctx = source.getContext("2d");
  if (!sctx) return;
  sctx.putImageData(new ImageData(rgba, width, height), 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(
    source,
    transform.tx,
    transform.ty,
    width * transform.scale,
    height * transform.scale,
  );
  for (const click of view.clicks) {
    drawMarker(ctx, click, transform);
  }
}

function drawMarker(
  ctx: CanvasRenderingContext2D,
  click: ClickJson,
  t: ViewTransform,
): void {
  const center = pixelToViewport(click.x + 0.5, click.y + 0.5, t);
  const arm = Math.max(3, t.scale * 0.6);
  ctx.lineWidth = 2;
  ctx.strokeStyle = click.polarity === "pos" ? "#27c840" : "#f5303d";
  ctx.beginPath();
  ctx.moveTo(center.x - arm, center.y);
  ctx.lineTo(center.x + arm, center.y);
  ctx.moveTo(center.x, center.y - arm);
  ctx.lineTo(center.x, center.y + arm);
  ctx.stroke();
}
