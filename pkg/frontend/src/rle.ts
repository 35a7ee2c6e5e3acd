/**
 * Run-length encoded binary masks, as the service sends and receives them.
 *
 * The JSON form is `{width, height, counts}` where `counts` lists run
 * lengths over the row-major flattened mask and the first run is always
 * background (a leading zero means the mask starts with foreground).
 */

export interface RleJson {
  width: number;
  height: number;
  counts: number[];
}

/** A decoded mask: one byte per pixel, row-major, 0 = bg / 1 = fg. */
export interface MaskBuffer {
  width: number;
  height: number;
  data: Uint8Array;
}

function badRle(msg: string): never {
  throw new Error(`invalid RLE mask: ${msg}`);
}

/** Decode an RLE payload, validating dimensions and run totals. */
export function decodeRle(rle: RleJson): MaskBuffer {
  const { width, height, counts } = rle;
  if (!Number.isInteger(width) || !Number.isInteger(height) || width < 1 || height < 1) {
    badRle(`dimensions ${width}x${height}`);
  }
  if (!Array.isArray(counts)) badRle("counts is not an array");
  const total = width * height;
  const data = new Uint8Array(total);
  let pos = 0;
  let value = 0;
  for (const run of counts) {
    if (!Number.isInteger(run) || run < 0) badRle(`run length ${run}`);
    if (pos + run > total) badRle(`runs sum past ${total} pixels`);
    if (value === 1) data.fill(1, pos, pos + run);
    pos += run;
    value ^= 1;
  }
  if (pos !== total) badRle(`runs sum to ${pos}, expected ${total}`);
  return { width, height, data };
}

/**
 * Encode a mask buffer back to the wire form.  The UI never mutates masks
 * it got from the service; this exists so the demo scene can register its
 * own ground truth when creating a session.
 */
export function encodeRle(mask: MaskBuffer): RleJson {
  const { width, height, data } = mask;
  const total = width * height;
  if (data.length !== total) badRle(`buffer length ${data.length} != ${total}`);
  const counts: number[] = [];
  let value = 0;
  let run = 0;
  for (let i = 0; i < total; i++) {
    const v = data[i] ? 1 : 0;
    if (v === value) {
      run++;
    } else {
      counts.push(run);
      value = v;
      run = 1;
    }
  }
  counts.push(run);
  return { width, height, counts };
}

/** Byte-wise equality of two decoded masks (dimensions included). */
export function masksEqual(a: MaskBuffer, b: MaskBuffer): boolean {
  if (a.width !== b.width || a.height !== b.height) return false;
  if (a.data.length !== b.data.length) return false;
  for (let i = 0; i < a.data.length; i++) {
    if (a.data[i] !== b.data[i]) return false;
  }
  return true;
}
