"""GrabCut-style segmentation: GMM color models plus exact s-t min-cut.

The pairwise (boundary) term follows the classic formulation: for
8-neighbors i, j the arc capacity is gamma * exp(-beta * ||I_i - I_j||^2)
/ dist(i, j), with beta = 1 / (2 * mean ||I_i - I_j||^2) over all
8-neighbor pairs of the image.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .core import BinaryMask, Image, _frozen
from .guidance import POSITIVE, Click

__all__ = [
    "Gmm",
    "FlowNetwork",
    "BoxPrior",
    "fit_gmm",
    "em_log_likelihood_trace",
    "max_flow_min_cut",
    "pairwise_beta",
    "grabcut_segment",
    "heuristic_box",
]

COV_RIDGE = 1e-3
UNARY_CLIP = 60.0
GAMMA = 50.0
GMM_COMPONENTS = 5
ROUNDS = 5
# Larger than any reachable sum of ordinary capacities around one pixel
# (unary clip + 8 boundary arcs of weight <= gamma), so a hard-labelled
# pixel can never sit on the wrong side of a minimum cut.
HARD_CAPACITY = UNARY_CLIP + 8 * GAMMA + 1.0


@dataclass(frozen=True)
class Gmm:
    """Full-covariance Gaussian mixture over RGB."""

    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, 3)
    covs: np.ndarray  # (K, 3, 3)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.asarray(self.means, dtype=np.float64)
        c = np.asarray(self.covs, dtype=np.float64)
        if w.ndim != 1 or m.shape != (w.size, 3) or c.shape != (w.size, 3, 3):
            raise ValueError("inconsistent mixture shapes")
        if not math.isclose(float(w.sum()), 1.0, abs_tol=1e-9):
            raise ValueError("component weights must sum to 1")
        if np.abs(c - np.swapaxes(c, 1, 2)).max() > 1e-9:
            raise ValueError("covariances must be symmetric")
        np.linalg.cholesky(c)  # positive-definite or raises
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "means", _frozen(m))
        object.__setattr__(self, "covs", _frozen(c))

    @property
    def k(self) -> int:
        return self.weights.size

    def log_prob(self, pixels: np.ndarray) -> np.ndarray:
        """Log density of each RGB row under the mixture."""
        x = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
        comp = np.empty((x.shape[0], self.k))
        for j in range(self.k):
            chol = np.linalg.cholesky(self.covs[j])
            z = np.linalg.solve(chol, (x - self.means[j]).T)
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            comp[:, j] = (math.log(self.weights[j])
                          - 0.5 * (z * z).sum(axis=0)
                          - 0.5 * logdet - 1.5 * math.log(2.0 * math.pi))
        top = comp.max(axis=1)
        return top + np.log(np.exp(comp - top[:, None]).sum(axis=1))


@dataclass(frozen=True)
class FlowNetwork:
    """Directed capacitated graph with distinguished source and sink."""

    n_nodes: int
    arcs: tuple  # of (from, to, capacity)
    source: int
    sink: int

    def __post_init__(self):
        if not (0 <= self.source < self.n_nodes
                and 0 <= self.sink < self.n_nodes):
            raise ValueError("terminals out of range")
        if self.source == self.sink:
            raise ValueError("source and sink must differ")
        for u, v, cap in self.arcs:
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise ValueError("arc endpoint out of range")
            if v == self.source or u == self.sink:
                raise ValueError("no arc may enter the source or leave the sink")
            if not (cap >= 0.0) or not math.isfinite(cap):
                raise ValueError("capacities must be finite and non-negative")
        object.__setattr__(self, "arcs", tuple((int(u), int(v), float(c))
                                               for u, v, c in self.arcs))


@dataclass(frozen=True)
class BoxPrior:
    """Inclusive pixel box x0..x1, y0..y1."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError("degenerate box")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError("box outside image")

    def clipped(self, width: int, height: int) -> "BoxPrior":
        return BoxPrior(max(0, self.x0), max(0, self.y0),
                        min(width - 1, self.x1), min(height - 1, self.y1))

    def contains(self, x: int, y: int) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1


def _kmeans_pp_centers(x: np.ndarray, k: int,
                       rng: np.random.Generator) -> np.ndarray:
    centers = [x[rng.integers(x.shape[0])]]
    for _ in range(1, k):
        d2 = np.min([((x - c) ** 2).sum(axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0.0:
            centers.append(x[rng.integers(x.shape[0])])
            continue
        centers.append(x[rng.choice(x.shape[0], p=d2 / total)])
    return np.stack(centers)


def _m_step(x: np.ndarray, resp: np.ndarray) -> Gmm:
    nk = resp.sum(axis=0)
    k = resp.shape[1]
    weights = np.maximum(nk, 1e-12)
    weights = weights / weights.sum()
    means = np.empty((k, 3))
    covs = np.empty((k, 3, 3))
    for j in range(k):
        if nk[j] < 1e-12:
            means[j] = x.mean(axis=0)
            covs[j] = np.eye(3)
        else:
            means[j] = resp[:, j] @ x / nk[j]
            d = x - means[j]
            covs[j] = (resp[:, j, None] * d).T @ d / nk[j]
        covs[j] = covs[j] + COV_RIDGE * np.eye(3)
        covs[j] = 0.5 * (covs[j] + covs[j].T)
    return Gmm(weights, means, covs)


def _em(x: np.ndarray, k: int, iterations: int,
        seed: int) -> tuple[Gmm, list[float]]:
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_centers(x, k, rng)
    assign = np.argmin(((x[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
    resp = np.zeros((x.shape[0], k))
    resp[np.arange(x.shape[0]), assign] = 1.0
    model = _m_step(x, resp)
    trace = []
    for _ in range(iterations):
        comp = np.empty((x.shape[0], k))
        for j in range(k):
            chol = np.linalg.cholesky(model.covs[j])
            z = np.linalg.solve(chol, (x - model.means[j]).T)
            comp[:, j] = (math.log(model.weights[j])
                          - 0.5 * (z * z).sum(axis=0)
                          - np.log(np.diag(chol)).sum()
                          - 1.5 * math.log(2.0 * math.pi))
        top = comp.max(axis=1)
        lse = top + np.log(np.exp(comp - top[:, None]).sum(axis=1))
        trace.append(float(lse.sum()))
        resp = np.exp(comp - lse[:, None])
        model = _m_step(x, resp)
    return model, trace


def fit_gmm(pixels, k: int, iterations: int = 10, seed: int = 0) -> Gmm:
    """EM fit with k-means++ seeding; deterministic per seed."""
    x = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    if x.shape[0] < k:
        raise ValueError("fewer pixels than mixture components")
    model, _ = _em(x, k, iterations, seed)
    return model


def em_log_likelihood_trace(pixels, k: int, iterations: int = 10,
                            seed: int = 0) -> list[float]:
    """Per-iteration total data log-likelihood of the EM fit."""
    x = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    if x.shape[0] < k:
        raise ValueError("fewer pixels than mixture components")
    _, trace = _em(x, k, iterations, seed)
    return trace


def max_flow_min_cut(net: FlowNetwork) -> tuple[float, frozenset]:
    """Exact max flow and a minimum source-side partition.

    Capacities are quantized onto a power-of-two grid fine enough that the
    scaled total stays within safe integer range; capacities that are
    already dyadic rationals at that resolution are handled exactly.
    """
    total = sum(c for _, _, c in net.arcs)
    shift = 0
    while total * (1 << (shift + 1)) <= (1 << 30) and shift < 40:
        shift += 1
    scale = 1 << shift

    merged: dict[tuple[int, int], int] = {}
    for u, v, c in net.arcs:
        key = (u, v)
        merged[key] = merged.get(key, 0) + int(round(c * scale))
    if merged:
        rows, cols, data = zip(*((u, v, c) for (u, v), c in merged.items()))
    else:
        rows, cols, data = (), (), ()
    graph = csr_matrix((np.asarray(data, dtype=np.int64),
                        (np.asarray(rows), np.asarray(cols))),
                       shape=(net.n_nodes, net.n_nodes))
    result = maximum_flow(graph, net.source, net.sink)

    residual = graph - result.flow  # reverse arcs get +flow automatically
    residual.eliminate_zeros()
    seen = np.zeros(net.n_nodes, dtype=bool)
    seen[net.source] = True
    stack = [net.source]
    indptr, indices = residual.indptr, residual.indices
    data_r = residual.data
    while stack:
        u = stack.pop()
        for p in range(indptr[u], indptr[u + 1]):
            v = indices[p]
            if data_r[p] > 0 and not seen[v]:
                seen[v] = True
                stack.append(v)
    return result.flow_value / scale, frozenset(np.flatnonzero(seen).tolist())


def pairwise_beta(img: Image) -> float:
    """1 / (2 * mean squared color difference) over 8-neighbor pairs."""
    a = img.pixels.astype(np.float64)
    h, w = a.shape[:2]
    sq_sum = 0.0
    count = 0
    for dy, dx in ((0, 1), (1, 0), (1, 1), (1, -1)):
        if dx >= 0:
            d = a[:h - dy, :w - dx] - a[dy:, dx:]
        else:
            d = a[:h - dy, -dx:] - a[dy:, :w + dx]
        sq_sum += (d * d).sum()
        count += d.shape[0] * d.shape[1]
    mean_sq = sq_sum / max(count, 1)
    return 1.0 / (2.0 * max(mean_sq, 1e-12))


def _neighbor_arcs(img: Image, gamma: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = img.pixels.astype(np.float64)
    h, w = a.shape[:2]
    beta = pairwise_beta(img)
    idx = np.arange(h * w).reshape(h, w)
    us, vs, caps = [], [], []
    for dy, dx, dist in ((0, 1, 1.0), (1, 0, 1.0),
                         (1, 1, math.sqrt(2.0)), (1, -1, math.sqrt(2.0))):
        if dx >= 0:
            src = idx[:h - dy, :w - dx]
            dst = idx[dy:, dx:]
            d = a[:h - dy, :w - dx] - a[dy:, dx:]
        else:
            src = idx[:h - dy, -dx:]
            dst = idx[dy:, :w + dx]
            d = a[:h - dy, -dx:] - a[dy:, :w + dx]
        weight = gamma / dist * np.exp(-beta * (d * d).sum(axis=2))
        us.append(src.ravel())
        vs.append(dst.ravel())
        caps.append(weight.ravel())
    u = np.concatenate(us)
    v = np.concatenate(vs)
    c = np.concatenate(caps)
    return np.concatenate([u, v]), np.concatenate([v, u]), np.concatenate([c, c])


def _min_cut_labels(img: Image, fg_cost: np.ndarray, bg_cost: np.ndarray,
                    gamma: float) -> np.ndarray:
    """Minimize unary + boundary energy; returns the foreground labels.

    Terminal capacities: source->p carries the background cost (paid when p
    ends on the sink side) and p->sink the foreground cost.
    """
    h, w = img.height, img.width
    n = h * w
    source, sink = n, n + 1
    nu, nv, nc = _neighbor_arcs(img, gamma)

    scale = 1
    total = float(nc.sum() + fg_cost.sum() + bg_cost.sum())
    shift = 0
    while total * (1 << (shift + 1)) <= (1 << 30) and shift < 40:
        shift += 1
    scale = 1 << shift

    pix = np.arange(n)
    rows = np.concatenate([nu, np.full(n, source), pix])
    cols = np.concatenate([nv, pix, np.full(n, sink)])
    data = np.concatenate([nc, bg_cost.ravel(), fg_cost.ravel()])
    graph = csr_matrix((np.rint(data * scale).astype(np.int64), (rows, cols)),
                       shape=(n + 2, n + 2))
    result = maximum_flow(graph, source, sink)
    residual = graph - result.flow
    residual.eliminate_zeros()
    seen = np.zeros(n + 2, dtype=bool)
    seen[source] = True
    stack = [source]
    indptr, indices, rdata = residual.indptr, residual.indices, residual.data
    while stack:
        node = stack.pop()
        for p in range(indptr[node], indptr[node + 1]):
            nxt = indices[p]
            if rdata[p] > 0 and not seen[nxt]:
                seen[nxt] = True
                stack.append(nxt)
    return seen[:n].reshape(h, w)


def grabcut_segment(img: Image, box: BoxPrior, clicks=(),
                    init: BinaryMask | None = None,
                    rounds: int = ROUNDS, gamma: float = GAMMA,
                    k: int = GMM_COMPONENTS, seed: int = 0) -> BinaryMask:
    """Iterated GMM refit + min-cut inside a box with click constraints.

    Pixels outside the box are hard background; positive-click pixels hard
    foreground; negative-click pixels hard background. `init`, when given,
    seeds the probable-foreground set, otherwise the box interior does.
    """
    h, w = img.height, img.width
    box = box.clipped(w, h)
    for c in clicks:
        if not (0 <= c.x < w and 0 <= c.y < h):
            raise ValueError("click (%d, %d) out of bounds" % (c.x, c.y))
    pos = [c for c in clicks if c.polarity == POSITIVE]
    if pos and not any(box.contains(c.x, c.y) for c in pos):
        raise ValueError("box excludes all positive clicks")

    in_box = np.zeros((h, w), dtype=bool)
    in_box[box.y0:box.y1 + 1, box.x0:box.x1 + 1] = True
    hard_fg = np.zeros((h, w), dtype=bool)
    hard_bg = ~in_box
    for c in clicks:
        if c.polarity == POSITIVE:
            hard_fg[c.y, c.x] = True
            hard_bg[c.y, c.x] = False
        else:
            hard_bg[c.y, c.x] = True
            hard_fg[c.y, c.x] = False

    if init is not None:
        fg = (init.labels & in_box) | hard_fg
    else:
        fg = in_box.copy()
    fg = fg & ~hard_bg

    pixels = img.pixels.reshape(-1, 3).astype(np.float64)
    labels = fg
    for _ in range(max(1, rounds)):
        fg_px = pixels[labels.ravel()]
        bg_px = pixels[~labels.ravel()]
        if fg_px.shape[0] == 0 or bg_px.shape[0] == 0:
            break
        k_fg = min(k, fg_px.shape[0])
        k_bg = min(k, bg_px.shape[0])
        fg_model = fit_gmm(fg_px, k_fg, iterations=5, seed=seed)
        bg_model = fit_gmm(bg_px, k_bg, iterations=5, seed=seed + 1)
        fg_cost = np.clip(-fg_model.log_prob(pixels), 0.0, UNARY_CLIP)
        bg_cost = np.clip(-bg_model.log_prob(pixels), 0.0, UNARY_CLIP)
        fg_cost = fg_cost.reshape(h, w)
        bg_cost = bg_cost.reshape(h, w)
        fg_cost[hard_fg] = 0.0
        bg_cost[hard_fg] = HARD_CAPACITY
        fg_cost[hard_bg] = HARD_CAPACITY
        bg_cost[hard_bg] = 0.0
        labels = _min_cut_labels(img, fg_cost, bg_cost, gamma)
        labels = (labels | hard_fg) & ~hard_bg
    return BinaryMask(labels)


def heuristic_box(current: BinaryMask, clicks=(), margin: int = 10) -> BoxPrior:
    """Bounding box of (mask foreground union positive clicks) plus margin."""
    xs = [c.x for c in clicks if c.polarity == POSITIVE]
    ys = [c.y for c in clicks if c.polarity == POSITIVE]
    if current.area > 0:
        rows = np.flatnonzero(current.labels.any(axis=1))
        cols = np.flatnonzero(current.labels.any(axis=0))
        xs += [int(cols[0]), int(cols[-1])]
        ys += [int(rows[0]), int(rows[-1])]
    if not xs:
        raise ValueError("empty mask and no positive clicks")
    return BoxPrior(max(0, min(xs) - margin), max(0, min(ys) - margin),
                    min(current.width - 1, max(xs) + margin),
                    min(current.height - 1, max(ys) + margin))
