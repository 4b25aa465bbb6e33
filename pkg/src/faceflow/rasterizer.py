"""Z-buffer triangle rasterization with per-pixel triangle and barycentric attribution.

Pixel ``(i, j)`` (row, column) has its centre at screen point ``(x=j, y=i)``. A pixel is
covered by a triangle when its centre is inside the projected triangle; centres lying
exactly on an edge follow the top-left fill rule, so two triangles sharing an edge never
both claim (or both drop) a sample. Among covering triangles the one with the largest
interpolated z wins (strict comparison, lower triangle index wins exact ties).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .morphable_model import CameraPose, Mesh3D, TextureMap, project

EMPTY_DEPTH = -np.inf


@dataclass
class RasterOutput:
    color: np.ndarray      # (H, W, 3) in [0, 1]
    depth: np.ndarray      # (H, W), EMPTY_DEPTH where uncovered
    tri_index: np.ndarray  # (H, W) int, -1 where uncovered
    bary: np.ndarray       # (H, W, 3), weights of the winning triangle's vertices
    mask: np.ndarray       # (H, W) bool coverage

    @property
    def shape(self) -> tuple[int, int]:
        return self.depth.shape

    @classmethod
    def empty(cls, width: int, height: int) -> "RasterOutput":
        return cls(
            color=np.zeros((height, width, 3)),
            depth=np.full((height, width), EMPTY_DEPTH),
            tri_index=np.full((height, width), -1, dtype=np.int64),
            bary=np.zeros((height, width, 3)),
            mask=np.zeros((height, width), dtype=bool),
        )


def _edge_values(p, q, xs, ys):
    """Edge function of the directed edge p->q at sample points.

    Evaluated from the lexicographically smaller endpoint so that a shared edge gives
    bit-identical magnitudes in both adjacent triangles (only the sign flips).
    """
    if (q[0], q[1]) < (p[0], p[1]):
        return -_edge_values(q, p, xs, ys)
    return (q[0] - p[0]) * (ys - p[1]) - (q[1] - p[1]) * (xs - p[0])


def _owns_edge(p, q) -> bool:
    # top-left rule for counter-clockwise-in-math (cross > 0) winding with y down
    dx, dy = q[0] - p[0], q[1] - p[1]
    return dy < 0 or (dy == 0 and dx > 0)


def _inside(w, owned):
    return (w > 0) | ((w == 0) & owned)


def interpolate(lam: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Barycentric interpolation ``sum_k lam_k v_k`` for ``lam`` (N, 3) and ``values`` (N, 3, ...).

    Written relative to the first vertex so a constant attribute comes back bit-exact.
    """
    lam = np.asarray(lam, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    extra = (slice(None),) + (None,) * (values.ndim - 2)
    base = values[:, 0]
    return (base + lam[:, 1][extra] * (values[:, 1] - base)
            + lam[:, 2][extra] * (values[:, 2] - base))


def rasterize_projected(projected: np.ndarray, triangles: np.ndarray, colors: np.ndarray | None,
                        width: int, height: int) -> RasterOutput:
    """Rasterize already-projected vertices ``(V, 3)`` of (screen x, screen y, z)."""
    if width < 1 or height < 1:
        raise ValueError("width and height must be >= 1")
    projected = np.asarray(projected, dtype=np.float64)
    triangles = np.asarray(triangles, dtype=np.int64)
    if colors is None:
        colors = np.ones((projected.shape[0], 3))
    colors = np.asarray(colors, dtype=np.float64)
    out = RasterOutput.empty(width, height)
    depth, tri_index, bary, color = out.depth, out.tri_index, out.bary, out.color

    for t, (i0, i1, i2) in enumerate(triangles):
        pts = projected[[i0, i1, i2]]
        a, b, c = pts[0, :2], pts[1, :2], pts[2, :2]
        area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if area2 == 0 or not np.isfinite(area2):
            continue
        order = (0, 1, 2) if area2 > 0 else (0, 2, 1)
        v = [pts[k, :2] for k in order]

        x_lo = max(int(np.ceil(pts[:, 0].min())), 0)
        x_hi = min(int(np.floor(pts[:, 0].max())), width - 1)
        y_lo = max(int(np.ceil(pts[:, 1].min())), 0)
        y_hi = min(int(np.floor(pts[:, 1].max())), height - 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        ys, xs = np.mgrid[y_lo:y_hi + 1, x_lo:x_hi + 1].astype(np.float64)

        # weight of vertex k comes from the edge opposite to it
        w = np.empty((3,) + xs.shape)
        inside = np.ones(xs.shape, dtype=bool)
        for k in range(3):
            p, q = v[(k + 1) % 3], v[(k + 2) % 3]
            w[k] = _edge_values(p, q, xs, ys)
            inside &= _inside(w[k], _owns_edge(p, q))
        if not inside.any():
            continue

        lam_sorted = w[:, inside] / w[:, inside].sum(axis=0)
        lam = np.empty_like(lam_sorted)
        lam[list(order)] = lam_sorted
        z = interpolate(lam.T, np.broadcast_to(pts[:, 2], (lam.shape[1], 3)))

        rows = ys[inside].astype(np.int64)
        cols = xs[inside].astype(np.int64)
        win = z > depth[rows, cols]
        if not win.any():
            continue
        rows, cols, lam, z = rows[win], cols[win], lam[:, win], z[win]
        depth[rows, cols] = z
        tri_index[rows, cols] = t
        bary[rows, cols] = lam.T
        color[rows, cols] = interpolate(lam.T, np.broadcast_to(colors[[i0, i1, i2]], (len(rows), 3, 3)))

    out.mask = tri_index >= 0
    np.clip(color, 0.0, 1.0, out=color)
    return out


def rasterize(mesh: Mesh3D, camera: CameraPose, texture: TextureMap | None,
              width: int, height: int) -> RasterOutput:
    """Project ``mesh`` with ``camera`` and z-buffer it into a ``height`` x ``width`` frame.

    ``texture`` holds per-vertex colours that are interpolated barycentrically; ``None``
    renders white. Degenerate (zero projected area) triangles are skipped.
    """
    colors = None if texture is None else texture.colors
    return rasterize_projected(project(mesh, camera), mesh.triangles, colors, width, height)


def facial_mask(raster: RasterOutput) -> np.ndarray:
    """Binary face-region map as float64 (1 on covered pixels, 0 elsewhere)."""
    return raster.mask.astype(np.float64)


def appearance_hint(source: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Blank out the face region of ``source``: ``source * (1 - mask)``."""
    source = np.asarray(source, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if source.shape[:2] != mask.shape:
        raise ValueError(f"image {source.shape[:2]} and mask {mask.shape} differ in size")
    if not np.all((mask == 0) | (mask == 1)):
        raise ValueError("mask must be binary")
    keep = 1.0 - mask
    return source * (keep[..., None] if source.ndim == 3 else keep)
