/**
 * Viewport <-> image-pixel coordinate mapping.
 *
 * A view transform scales image pixels by `scale` and then shifts them by
 * `(tx, ty)` viewport units, so viewport = pixel * scale + t.  Pointer
 * events come in viewport coordinates and must be inverse-transformed and
 * floored to land on an integer pixel.
 */

export interface ViewTransform {
  scale: number;
  tx: number;
  ty: number;
}

/**
 * Sentinel for a pointer position outside the image.  It is `null`, never
 * a clamped coordinate: callers must drop out-of-bounds input rather than
 * snap it to the nearest edge pixel.
 */
export const OUT_OF_BOUNDS = null;

export type PixelHit = { x: number; y: number } | typeof OUT_OF_BOUNDS;

export function identityTransform(): ViewTransform {
  return { scale: 1, tx: 0, ty: 0 };
}

/** Map an image pixel's top-left corner into viewport coordinates. */
export function pixelToViewport(
  x: number,
  y: number,
  t: ViewTransform,
): { x: number; y: number } {
  return { x: x * t.scale + t.tx, y: y * t.scale + t.ty };
}

/**
 * Map a viewport point to the image pixel under it, or OUT_OF_BOUNDS when
 * the point misses the `width x height` image entirely.
 */
export function mapPointerToPixel(
  px: number,
  py: number,
  t: ViewTransform,
  width: number,
  height: number,
): PixelHit {
  if (!(t.scale > 0) || !Number.isFinite(t.tx) || !Number.isFinite(t.ty)) {
    throw new Error(`invalid view transform scale=${t.scale} tx=${t.tx} ty=${t.ty}`);
  }
  const x = Math.floor((px - t.tx) / t.scale);
  const y = Math.floor((py - t.ty) / t.scale);
  if (x < 0 || y < 0 || x >= width || y >= height) return OUT_OF_BOUNDS;
  return { x, y };
}

/**
 * Change zoom while keeping the viewport point (cx, cy) anchored on the
 * same image location.
 */
export function zoomAround(
  t: ViewTransform,
  newScale: number,
  cx: number,
  cy: number,
): ViewTransform {
  if (!(newScale > 0)) throw new Error(`invalid zoom scale ${newScale}`);
  const k = newScale / t.scale;
  return {
    scale: newScale,
    tx: cx - (cx - t.tx) * k,
    ty: cy - (cy - t.ty) * k,
  };
}
