"""Level-set extraction and topology checks on 2D lattices.

Hand-rolled marching squares produces the segments of {u = level} on a
regular grid; segments are then linked into connected curve components.
These counts, together with Hausdorff distances between point sets, replace
the diffeomorphism bookkeeping when verifying prescribed isotherm shapes.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree


def _edge_point(p0, p1, v0, v1, level):
    # linear interpolation along a cell edge crossing the level
    s = (level - v0) / (v1 - v0)
    return p0 + s * (p1 - p0)


def marching_squares(values, x_axis, y_axis, level):
    """Segments of the level curve {values = level} on the grid.

    values is indexed [ix, iy].  Returns an (S, 2, 2) array of segment
    endpoints in (x, y) coordinates.  Saddle cells are split by the cell
    average, the standard disambiguation.
    """
    v = np.asarray(values, dtype=float)
    nx, ny = v.shape
    segs = []
    gt = v > level
    for ix in range(nx - 1):
        for iy in range(ny - 1):
            code = (int(gt[ix, iy]) | int(gt[ix + 1, iy]) << 1
                    | int(gt[ix + 1, iy + 1]) << 2 | int(gt[ix, iy + 1]) << 3)
            if code in (0, 15):
                continue
            corners = np.array([
                [x_axis[ix], y_axis[iy]],
                [x_axis[ix + 1], y_axis[iy]],
                [x_axis[ix + 1], y_axis[iy + 1]],
                [x_axis[ix], y_axis[iy + 1]],
            ])
            vals = np.array([v[ix, iy], v[ix + 1, iy],
                             v[ix + 1, iy + 1], v[ix, iy + 1]])
            # edge k joins corner k and corner (k+1) % 4
            pts = {}
            for k in range(4):
                a, b = k, (k + 1) % 4
                if (vals[a] > level) != (vals[b] > level):
                    pts[k] = _edge_point(corners[a], corners[b],
                                         vals[a], vals[b], level)
            edges = sorted(pts)
            if len(edges) == 2:
                segs.append((pts[edges[0]], pts[edges[1]]))
            elif len(edges) == 4:
                center = vals.mean()
                if (center > level) == gt[ix, iy]:
                    segs.append((pts[0], pts[3]))
                    segs.append((pts[1], pts[2]))
                else:
                    segs.append((pts[0], pts[1]))
                    segs.append((pts[2], pts[3]))
    if not segs:
        return np.zeros((0, 2, 2))
    return np.asarray(segs)


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


def segment_components(segments, tol=None):
    """Group level-curve segments into connected components.

    Endpoints within tol snap together.  Returns a list of segment-index
    arrays, one per component.
    """
    segs = np.asarray(segments, dtype=float)
    if segs.shape[0] == 0:
        return []
    pts = segs.reshape(-1, 2)
    if tol is None:
        lengths = np.linalg.norm(segs[:, 0] - segs[:, 1], axis=-1)
        scale = np.median(lengths[lengths > 0]) if np.any(lengths > 0) else 1.0
        tol = 0.25 * scale
    tree = cKDTree(pts)
    uf = _UnionFind(pts.shape[0])
    for i, j in tree.query_pairs(tol):
        uf.union(i, j)
    for s in range(segs.shape[0]):
        uf.union(2 * s, 2 * s + 1)
    roots = {}
    comps = {}
    for s in range(segs.shape[0]):
        r = uf.find(2 * s)
        comps.setdefault(r, []).append(s)
    return [np.asarray(v) for v in comps.values()]


def count_level_components(values, x_axis, y_axis, level, mask=None):
    """Number of connected components of {values = level}, optionally
    discarding segments whose midpoint falls outside a node mask."""
    segs = marching_squares(values, x_axis, y_axis, level)
    if mask is not None and segs.shape[0]:
        mids = segs.mean(axis=1)
        ix = np.clip(np.searchsorted(x_axis, mids[:, 0]) - 1, 0, len(x_axis) - 2)
        iy = np.clip(np.searchsorted(y_axis, mids[:, 1]) - 1, 0, len(y_axis) - 2)
        keep = mask[ix, iy] | mask[ix + 1, iy] | mask[ix, iy + 1] | mask[ix + 1, iy + 1]
        segs = segs[keep]
    comps = segment_components(segs)
    return len(comps), segs


def hausdorff_distance(pts_a, pts_b):
    """Symmetric Hausdorff distance between two nonempty 2D point sets."""
    a = np.atleast_2d(np.asarray(pts_a, dtype=float))
    b = np.atleast_2d(np.asarray(pts_b, dtype=float))
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.inf
    ta, tb = cKDTree(a), cKDTree(b)
    d_ab = tb.query(a)[0].max()
    d_ba = ta.query(b)[0].max()
    return float(max(d_ab, d_ba))


def mask_components(mask, connectivity=1):
    """Label connected components of a boolean array (flood fill)."""
    structure = ndimage.generate_binary_structure(mask.ndim, connectivity)
    labels, n = ndimage.label(mask, structure=structure)
    return labels, int(n)


def components_touching_border(mask, connectivity=1):
    """Labels of mask components that reach the array border."""
    labels, n = mask_components(mask, connectivity)
    border = np.zeros_like(mask, dtype=bool)
    for axis in range(mask.ndim):
        sl = [slice(None)] * mask.ndim
        sl[axis] = 0
        border[tuple(sl)] = True
        sl[axis] = -1
        border[tuple(sl)] = True
    touching = set(np.unique(labels[border & mask]))
    touching.discard(0)
    return labels, n, touching


def closed_polyline_points(center, radius, n=256):
    """Points on a circle, the reference shape for round prescriptions."""
    th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    return np.column_stack([center[0] + radius * np.cos(th),
                            center[1] + radius * np.sin(th)])


def two_lobe_points(center, scale, n=512, squeeze=0.55, lobe=1.35):
    """Points on a smooth two-lobed ("peanut") closed curve.

    r(theta) = scale * sqrt(squeeze + lobe * cos(theta)^2) traces a curve
    pinched along the y axis with two lobes on the x axis.
    """
    th = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    r = scale * np.sqrt(squeeze + lobe * np.cos(th) ** 2)
    return np.column_stack([center[0] + r * np.cos(th),
                            center[1] + r * np.sin(th)])


def point_in_polygon(points, polygon):
    """Even-odd rule membership for (N, 2) points in a closed polygon."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(polygon, dtype=float)
    x, y = pts[:, 0], pts[:, 1]
    inside = np.zeros(pts.shape[0], dtype=bool)
    px, py = poly[:, 0], poly[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    for (x0, y0, x1, y1) in zip(px, py, qx, qy):
        crosses = ((y0 > y) != (y1 > y))
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (x < xint)
    return inside
