"""Raster primitives: images, binary masks, probability maps, metrics, I/O.

Pixel coordinates are (x, y) = (column, row); arrays are indexed [y, x].
All wrapper types freeze their backing array, so values are safe to share.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Image:
    """8-bit RGB image, shape (H, W, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"image must be (H, W, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image dimensions must be >= 1")
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """Per-pixel foreground labeling, shape (H, W) bool."""

    labels: np.ndarray

    def __post_init__(self):
        lb = np.asarray(self.labels)
        if lb.dtype != np.bool_:
            lb = lb.astype(bool)
        if lb.ndim != 2 or lb.shape[0] < 1 or lb.shape[1] < 1:
            raise ValueError(f"mask must be 2-D and nonempty, got shape {lb.shape}")
        object.__setattr__(self, "labels", _frozen(lb))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def area(self) -> int:
        return int(self.labels.sum())

    @staticmethod
    def empty(width: int, height: int) -> "BinaryMask":
        return BinaryMask(np.zeros((height, width), dtype=bool))


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-pixel foreground probability, shape (H, W) float64 in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"probability map must be 2-D and nonempty, got {v.shape}")
        if np.isnan(v).any() or v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("probability values must lie in [0, 1]")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class RleMask:
    """Row-major run-length encoding; first run counts background pixels."""

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if self.width < 1 or self.height < 1:
            raise ValueError("RLE dimensions must be >= 1")
        if any(c < 0 for c in self.counts):
            raise ValueError("RLE counts must be >= 0")
        if sum(self.counts) != self.width * self.height:
            raise ValueError(
                f"RLE counts sum to {sum(self.counts)}, expected {self.width * self.height}"
            )


def _check_same_dims(a, b, what: str = "operands"):
    if a.width != b.width or a.height != b.height:
        raise ValueError(
            f"{what} dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union. Two empty masks agree perfectly (1.0)."""
    _check_same_dims(a, b, "masks")
    union = int(np.logical_or(a.labels, b.labels).sum())
    if union == 0:
        return 1.0
    inter = int(np.logical_and(a.labels, b.labels).sum())
    return inter / union


def distance_transform(m: BinaryMask) -> np.ndarray:
    """Exact Euclidean distance from each pixel to the nearest true pixel.

    Empty mask yields +inf everywhere. Only in-raster pixels count: a mask
    touching the image edge has no boundary there.
    """
    if not m.labels.any():
        return np.full((m.height, m.width), np.inf)
    return ndimage.distance_transform_edt(~m.labels)


@dataclass(frozen=True)
class Component:
    mask: BinaryMask
    area: int


def connected_components(m: BinaryMask, connectivity: int = 4) -> list[Component]:
    """Partition of true pixels into 4- or 8-connected components.

    Order follows first row-major occurrence of each component.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = ndimage.generate_binary_structure(2, 1 if connectivity == 4 else 2)
    labels, n = ndimage.label(m.labels, structure)
    out = []
    for i in range(1, n + 1):
        comp = labels == i
        out.append(Component(mask=BinaryMask(comp), area=int(comp.sum())))
    return out


def rle_encode(m: BinaryMask) -> RleMask:
    flat = m.labels.ravel()
    # run boundaries, with a leading background run (possibly 0)
    changes = np.nonzero(np.diff(flat))[0] + 1
    edges = np.concatenate([[0], changes, [flat.size]])
    counts = np.diff(edges).tolist()
    if flat[0]:
        counts = [0] + counts
    return RleMask(width=m.width, height=m.height, counts=tuple(counts))


def rle_decode(r: RleMask) -> BinaryMask:
    vals = np.zeros(r.width * r.height, dtype=bool)
    pos = 0
    val = False
    for c in r.counts:
        if val:
            vals[pos : pos + c] = True
        pos += c
        val = not val
    return BinaryMask(vals.reshape(r.height, r.width))


def rle_to_json(r: RleMask) -> dict:
    return {"width": r.width, "height": r.height, "counts": list(r.counts)}


def rle_from_json(obj: dict) -> RleMask:
    return RleMask(width=int(obj["width"]), height=int(obj["height"]),
                   counts=tuple(obj["counts"]))


# ---------------------------------------------------------------------------
# PNM I/O. Images are binary PPM (P6), masks binary PGM (P5), maxval 255.

class PnmError(ValueError):
    pass


def _parse_pnm_header(data: bytes, magic: bytes):
    if not data.startswith(magic):
        raise PnmError(f"expected {magic.decode()} header")
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise PnmError("truncated header")
        c = data[pos : pos + 1]
        if c == b"#":  # comment to end of line
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        elif c.isdigit():
            start = pos
            while pos < len(data) and data[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise PnmError(f"unexpected byte {c!r} in header")
    # exactly one whitespace byte separates maxval from the payload
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PnmError("missing whitespace before payload")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise PnmError(f"invalid dimensions {width}x{height}")
    if maxval != 255:
        raise PnmError(f"only maxval 255 supported, got {maxval}")
    return width, height, pos


def write_ppm(img: Image) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode()
    return header + img.pixels.tobytes()


def read_ppm(data: bytes) -> Image:
    w, h, pos = _parse_pnm_header(data, b"P6")
    need = w * h * 3
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise PnmError(f"truncated payload: need {need} bytes, have {len(payload)}")
    return Image(np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3))


def write_pgm_mask(m: BinaryMask) -> bytes:
    header = f"P5\n{m.width} {m.height}\n255\n".encode()
    return header + (m.labels.astype(np.uint8) * 255).tobytes()


def read_pgm_mask(data: bytes) -> BinaryMask:
    w, h, pos = _parse_pnm_header(data, b"P5")
    need = w * h
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise PnmError(f"truncated payload: need {need} bytes, have {len(payload)}")
    vals = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    return BinaryMask(vals > 127)


def write_pgm_gray(values: np.ndarray) -> bytes:
    """8-bit grayscale PGM from a float array in [0, 1]."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    h, w = v.shape
    header = f"P5\n{w} {h}\n255\n".encode()
    return header + np.rint(v * 255).astype(np.uint8).tobytes()


def read_pgm_prob(data: bytes) -> ProbabilityMap:
    w, h, pos = _parse_pnm_header(data, b"P5")
    need = w * h
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise PnmError(f"truncated payload: need {need} bytes, have {len(payload)}")
    vals = np.frombuffer(payload, dtype=np.uint8).reshape(h, w)
    return ProbabilityMap(vals.astype(np.float64) / 255.0)


def save_bytes(path, data: bytes) -> None:
    with open(path, "wb") as f:
        f.write(data)


def read_bytes(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def save_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def load_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
