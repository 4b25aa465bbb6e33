"""Mesh-derived optical flow between consecutive frames, visibility maps, warping, temporal loss.

Flow runs from frame t back to frame t-1: at pixel ``(i, j)`` of frame t the surface point
moved by ``W = sum_k lambda_k (V_k^t - V_k^{t-1})`` in (screen x, screen y, camera z), so
the same point sat at ``(j, i, Q_z) - W`` in frame t-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rasterizer import RasterOutput, interpolate, rasterize_projected

DEFAULT_DEPTH_EPS_REL = 1e-5


@dataclass
class FramePairGeometry:
    raster_t: RasterOutput
    raster_prev: RasterOutput
    vertices_t: np.ndarray     # (V, 3) projected: screen x, screen y, camera z
    vertices_prev: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.vertices_t = np.asarray(self.vertices_t, dtype=np.float64)
        self.vertices_prev = np.asarray(self.vertices_prev, dtype=np.float64)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        if self.raster_t.shape != self.raster_prev.shape:
            raise ValueError("frame rasters differ in resolution")

    @classmethod
    def from_projected(cls, vertices_t, vertices_prev, triangles, width, height, colors=None):
        """Rasterize both frames and bundle them."""
        return cls(
            rasterize_projected(vertices_t, triangles, colors, width, height),
            rasterize_projected(vertices_prev, triangles, colors, width, height),
            vertices_t, vertices_prev, triangles,
        )

    def depth_eps(self, rel: float = DEFAULT_DEPTH_EPS_REL) -> float:
        """Visibility tolerance: ``rel`` times the scene depth range (range floored at 1)."""
        z = np.concatenate([self.vertices_t[:, 2], self.vertices_prev[:, 2]])
        return rel * max(float(z.max() - z.min()), 1.0)


@dataclass
class DenseFlowField:
    flow: np.ndarray      # (H, W, 3) raw W
    vis_t: np.ndarray     # (H, W) bool
    vis_prev: np.ndarray  # (H, W) bool, gathered at the warped locations
    final: np.ndarray     # (H, W, 3) = flow * vis_t * vis_prev

    @classmethod
    def from_flow(cls, flow) -> "DenseFlowField":
        """Wrap a plain ``(H, W, 2|3)`` field, every pixel treated as visible."""
        flow = np.asarray(flow, dtype=np.float64)
        if flow.shape[2] == 2:
            flow = np.concatenate([flow, np.zeros(flow.shape[:2] + (1,))], axis=2)
        ones = np.ones(flow.shape[:2], dtype=bool)
        return cls(flow, ones, ones.copy(), flow.copy())


def vertex_displacements(geom: FramePairGeometry) -> np.ndarray:
    if geom.vertices_t.shape != geom.vertices_prev.shape:
        raise ValueError(f"vertex counts differ: {geom.vertices_t.shape} vs {geom.vertices_prev.shape}")
    return geom.vertices_t - geom.vertices_prev


def _attributed(geom: FramePairGeometry):
    raster = geom.raster_t
    rows, cols = np.nonzero(raster.tri_index >= 0)
    tri = geom.triangles[raster.tri_index[rows, cols]]   # (N, 3) vertex ids
    lam = raster.bary[rows, cols]                         # (N, 3)
    return rows, cols, tri, lam


def interpolate_flow(geom: FramePairGeometry) -> np.ndarray:
    """Raw flow ``W`` at every covered pixel of frame t; zero elsewhere."""
    disp = vertex_displacements(geom)
    h, w = geom.raster_t.shape
    flow = np.zeros((h, w, 3))
    rows, cols, tri, lam = _attributed(geom)
    flow[rows, cols] = interpolate(lam, disp[tri])
    return flow


def _interpolated_depth_t(geom: FramePairGeometry):
    rows, cols, tri, lam = _attributed(geom)
    return rows, cols, interpolate(lam, geom.vertices_t[tri, 2])


def visibility_t(geom: FramePairGeometry, eps: float | None = None) -> np.ndarray:
    """1 where the attributed surface point is at least as close as the depth buffer."""
    eps = geom.depth_eps() if eps is None else eps
    rows, cols, qz = _interpolated_depth_t(geom)
    vis = np.zeros(geom.raster_t.shape, dtype=bool)
    vis[rows, cols] = qz >= geom.raster_t.depth[rows, cols] - eps
    return vis


def sample_depth(depth: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Sample a depth buffer at continuous points.

    Bilinear when all four neighbouring pixel centres are covered; otherwise the nearest
    covered neighbour; ``valid`` is False when no neighbour is covered or the point lies
    outside the image (beyond half a pixel from the outer centres).
    """
    h, w = depth.shape
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    inside = (x >= -0.5) & (x < w - 0.5) & (y >= -0.5) & (y < h - 0.5)
    xc = np.clip(x, 0.0, w - 1.0)
    yc = np.clip(y, 0.0, h - 1.0)
    x0 = np.floor(xc).astype(np.int64)
    y0 = np.floor(yc).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0

    corners = [(y0, x0, (1 - fx) * (1 - fy)), (y0, x1, fx * (1 - fy)),
               (y1, x0, (1 - fx) * fy), (y1, x1, fx * fy)]
    vals = np.stack([depth[r, c] for r, c, _ in corners])
    weights = np.stack([wt for _, _, wt in corners])
    covered = np.isfinite(vals)
    all_covered = covered.all(axis=0)

    out = np.full(x.shape, -np.inf)
    bil = np.where(covered, vals, 0.0)
    out[all_covered] = (weights * bil).sum(axis=0)[all_covered]

    partial = covered.any(axis=0) & ~all_covered
    if partial.any():
        dist = np.stack([(c - xc) ** 2 + (r - yc) ** 2 for r, c, _ in corners])
        dist = np.where(covered, dist, np.inf)
        nearest = np.argmin(dist, axis=0)
        picked = np.take_along_axis(vals, nearest[None], axis=0)[0]
        out[partial] = picked[partial]

    valid = inside & covered.any(axis=0)
    return out, valid


def visibility_prev(geom: FramePairGeometry, flow: np.ndarray, eps: float | None = None) -> np.ndarray:
    """Visibility in frame t-1 of each frame-t pixel's surface point, indexed by frame-t pixel."""
    eps = geom.depth_eps() if eps is None else eps
    rows, cols, qz = _interpolated_depth_t(geom)
    disp = flow[rows, cols]
    qx_prev = cols - disp[:, 0]
    qy_prev = rows - disp[:, 1]
    qz_prev = qz - disp[:, 2]
    sampled, valid = sample_depth(geom.raster_prev.depth, qx_prev, qy_prev)
    vis = np.zeros(geom.raster_t.shape, dtype=bool)
    vis[rows, cols] = valid & (qz_prev >= sampled - eps)
    return vis


def dense_flow(geom: FramePairGeometry, eps_rel: float = DEFAULT_DEPTH_EPS_REL) -> DenseFlowField:
    eps = geom.depth_eps(eps_rel)
    flow = interpolate_flow(geom)
    vis_t = visibility_t(geom, eps)
    vis_prev = visibility_prev(geom, flow, eps)
    final = flow * (vis_t & vis_prev)[..., None]
    return DenseFlowField(flow, vis_t, vis_prev, final)


def sparse_flow(geom: FramePairGeometry, eps_rel: float = DEFAULT_DEPTH_EPS_REL) -> DenseFlowField:
    """Per-vertex flow splatted to the nearest pixel of each vertex's frame-t position.

    A vertex is visible in a frame when its depth is within tolerance of that frame's
    depth buffer sampled at the vertex's exact projected position (same sampling rule as
    the dense path; a nearest-pixel lookup would hide every vertex on a sloped surface).
    Several vertices on one pixel: the front-most (then lowest index) one is kept. Pixels
    with no vertex, or uncovered in frame t, stay 0.
    """
    eps = geom.depth_eps(eps_rel)
    disp = vertex_displacements(geom)
    h, w = geom.raster_t.shape

    def vertex_visible(verts, raster):
        buf, valid = sample_depth(raster.depth, verts[:, 0], verts[:, 1])
        return valid & (verts[:, 2] >= buf - eps)

    cols = np.floor(geom.vertices_t[:, 0] + 0.5).astype(np.int64)
    rows = np.floor(geom.vertices_t[:, 1] + 0.5).astype(np.int64)
    in_frame = (cols >= 0) & (cols < w) & (rows >= 0) & (rows < h)
    vis_t_v = vertex_visible(geom.vertices_t, geom.raster_t)
    vis_prev_v = vertex_visible(geom.vertices_prev, geom.raster_prev)
    candidates = np.nonzero(in_frame)[0]
    candidates = candidates[geom.raster_t.mask[rows[candidates], cols[candidates]]]

    # front-most vertex per pixel, lower index on ties
    order = np.lexsort((candidates, -geom.vertices_t[candidates, 2]))
    chosen = {}
    for v in candidates[order]:
        chosen.setdefault((rows[v], cols[v]), v)

    flow = np.zeros((h, w, 3))
    vis_t = np.zeros((h, w), dtype=bool)
    vis_prev = np.zeros((h, w), dtype=bool)
    for (r, c), v in chosen.items():
        flow[r, c] = disp[v]
        vis_t[r, c] = vis_t_v[v]
        vis_prev[r, c] = vis_prev_v[v]
    final = flow * (vis_t & vis_prev)[..., None]
    return DenseFlowField(flow, vis_t, vis_prev, final)


def _flow_xy(flow) -> np.ndarray:
    arr = flow.final if isinstance(flow, DenseFlowField) else np.asarray(flow, dtype=np.float64)
    return arr[..., :2]


def warp(image: np.ndarray, flow) -> np.ndarray:
    """Backward-warp ``image`` (frame t) to frame t-1: ``out(i, j) = image(i + F_y, j + F_x)``.

    Bilinear sampling, clamp-to-edge. ``flow`` is a :class:`DenseFlowField` (its final
    field is used) or an ``(H, W, >=2)`` array; the z component is ignored.
    """
    image = np.asarray(image, dtype=np.float64)
    fxy = _flow_xy(flow)
    h, w = image.shape[:2]
    if fxy.shape[:2] != (h, w):
        raise ValueError(f"image {image.shape[:2]} and flow {fxy.shape[:2]} differ in size")
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    x = np.clip(cols + fxy[..., 0], 0.0, w - 1.0)
    y = np.clip(rows + fxy[..., 1], 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    ax = x - x0
    ay = y - y0
    if image.ndim == 3:
        ax, ay = ax[..., None], ay[..., None]
    top = image[y0, x0] * (1 - ax) + image[y0, x1] * ax
    bottom = image[y1, x0] * (1 - ax) + image[y1, x1] * ax
    return top * (1 - ay) + bottom * ay


def temporal_loss(y_t: np.ndarray, y_prev: np.ndarray, flow, region: str = "full") -> float:
    """Mean squared error between ``y_prev`` and ``warp(y_t, flow)``.

    ``region``: ``"full"`` averages over every pixel and channel; ``"interior"`` drops a
    border as wide as the largest flow magnitude (at least one pixel); ``"support"`` keeps
    only pixels visible in both frames (needs a :class:`DenseFlowField`).
    """
    y_t = np.asarray(y_t, dtype=np.float64)
    y_prev = np.asarray(y_prev, dtype=np.float64)
    if y_t.shape != y_prev.shape:
        raise ValueError(f"frame shapes differ: {y_t.shape} vs {y_prev.shape}")
    sq = (y_prev - warp(y_t, flow)) ** 2
    if region == "full":
        return float(sq.mean())
    if region == "interior":
        fxy = _flow_xy(flow)
        m = max(1, int(np.ceil(np.abs(fxy).max()))) if fxy.size else 1
        inner = sq[m:-m, m:-m]
        if inner.size == 0:
            raise ValueError("image too small for interior evaluation")
        return float(inner.mean())
    if region == "support":
        if not isinstance(flow, DenseFlowField):
            raise TypeError("support region needs a DenseFlowField")
        keep = flow.vis_t & flow.vis_prev
        if not keep.any():
            return 0.0
        return float(sq[keep].mean())
    raise ValueError(f"unknown region {region!r}")
