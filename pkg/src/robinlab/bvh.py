"""Bounding-volume hierarchy over polygon edges.

Nearest-boundary-point queries dominate the Monte Carlo walk cost, so the
index is a flat-array AABB tree traversed by numba kernels.  A warm-start
hint (the previously nearest edge) seeds the search bound, which makes
near-boundary queries close to O(1).  Tie-breaking matches the brute-force
scan: equal distances go to the lowest edge id.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

LEAF_SIZE = 4
_STACK = 128  # traversal stack; ample for 8 generations of any family


@njit(cache=True, inline="always")
def _seg_nearest(px, py, ax, ay, bx, by):
    """Squared distance and nearest point from (px,py) to segment a-b."""
    dx = bx - ax
    dy = by - ay
    t = ((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    qx = ax + t * dx
    qy = ay + t * dy
    ex = px - qx
    ey = py - qy
    return ex * ex + ey * ey, qx, qy, t


@njit(cache=True)
def brute_nearest(px, py, ax, ay, bx, by):
    best = np.inf
    bqx = 0.0
    bqy = 0.0
    beid = -1
    for i in range(ax.shape[0]):
        d2, qx, qy, _ = _seg_nearest(px, py, ax[i], ay[i], bx[i], by[i])
        if d2 < best:
            best = d2
            bqx = qx
            bqy = qy
            beid = i
    return math.sqrt(best), bqx, bqy, beid


@njit(cache=True, inline="always")
def _bbox_dist2(px, py, minx, miny, maxx, maxy):
    dx = 0.0
    dy = 0.0
    if px < minx:
        dx = minx - px
    elif px > maxx:
        dx = px - maxx
    if py < miny:
        dy = miny - py
    elif py > maxy:
        dy = py - maxy
    return dx * dx + dy * dy


@njit(cache=True)
def bvh_nearest(px, py, ax, ay, bx, by,
                node_bbox, node_left, node_right, node_start, node_count,
                perm, hint):
    """Nearest boundary point; `hint` edge id seeds the pruning bound."""
    best = np.inf
    bqx = 0.0
    bqy = 0.0
    beid = -1
    if 0 <= hint < ax.shape[0]:
        d2, qx, qy, _ = _seg_nearest(px, py, ax[hint], ay[hint], bx[hint], by[hint])
        best = d2
        bqx = qx
        bqy = qy
        beid = hint
    stack = np.empty(_STACK, dtype=np.int64)
    stack[0] = 0
    top = 1
    while top > 0:
        top -= 1
        n = stack[top]
        bb = node_bbox[n]
        if _bbox_dist2(px, py, bb[0], bb[1], bb[2], bb[3]) > best:
            continue
        if node_left[n] < 0:  # leaf
            s = node_start[n]
            for k in range(s, s + node_count[n]):
                i = perm[k]
                d2, qx, qy, _ = _seg_nearest(px, py, ax[i], ay[i], bx[i], by[i])
                if d2 < best or (d2 == best and i < beid):
                    best = d2
                    bqx = qx
                    bqy = qy
                    beid = i
        else:
            stack[top] = node_left[n]
            stack[top + 1] = node_right[n]
            top += 2
    return math.sqrt(best), bqx, bqy, beid


@njit(cache=True)
def crossing_inside(px, py, ax, ay, bx, by):
    """Even-odd rule point-in-polygon over the edge arrays."""
    inside = False
    for i in range(ax.shape[0]):
        y1 = ay[i]
        y2 = by[i]
        if (y1 > py) != (y2 > py):
            xcross = ax[i] + (py - y1) / (y2 - y1) * (bx[i] - ax[i])
            if xcross > px:
                inside = not inside
    return inside


@njit(cache=True)
def grid_nearest(px, py, ax, ay, bx, by,
                 gx0, gy0, cell, gnx, gny, cell_start, cell_items,
                 node_bbox, node_left, node_right, node_start, node_count,
                 perm, hint):
    """Nearest boundary point via the uniform near-boundary grid.

    Each cell lists every edge within one cell size of it, so a candidate
    minimum <= cell size is provably the global nearest.  Points outside
    the grid, in empty cells, or farther than a cell size fall back to the
    BVH.  Covers the vast majority of walk queries (they sit within ~eps
    of the boundary).
    """
    ix = int((px - gx0) / cell)
    iy = int((py - gy0) / cell)
    if 0 <= ix < gnx and 0 <= iy < gny:
        c = ix * gny + iy
        s = cell_start[c]
        e = cell_start[c + 1]
        if e > s:
            best = np.inf
            bqx = 0.0
            bqy = 0.0
            beid = -1
            for k in range(s, e):
                i = cell_items[k]
                d2, qx, qy, _ = _seg_nearest(px, py, ax[i], ay[i], bx[i], by[i])
                if d2 < best:
                    best = d2
                    bqx = qx
                    bqy = qy
                    beid = i
            if best <= cell * cell:
                return math.sqrt(best), bqx, bqy, beid
    return bvh_nearest(px, py, ax, ay, bx, by, node_bbox, node_left,
                       node_right, node_start, node_count, perm, hint)


def _build_tree(centroids, bboxes):
    """Median-split build; returns flat node arrays and the edge permutation."""
    n = len(centroids)
    perm = np.arange(n, dtype=np.int64)
    max_nodes = 4 * n + 2  # loose bound; median splits can leave 2-edge leaves
    node_bbox = np.empty((max_nodes, 4), dtype=np.float64)
    node_left = np.full(max_nodes, -1, dtype=np.int64)
    node_right = np.full(max_nodes, -1, dtype=np.int64)
    node_start = np.zeros(max_nodes, dtype=np.int64)
    node_count = np.zeros(max_nodes, dtype=np.int64)
    n_nodes = 1
    stack = [(0, 0, n)]  # (node, start, end) over perm
    while stack:
        node, s, e = stack.pop()
        idx = perm[s:e]
        bb = bboxes[idx]
        node_bbox[node, 0] = bb[:, 0].min()
        node_bbox[node, 1] = bb[:, 1].min()
        node_bbox[node, 2] = bb[:, 2].max()
        node_bbox[node, 3] = bb[:, 3].max()
        if e - s <= LEAF_SIZE:
            node_start[node] = s
            node_count[node] = e - s
            continue
        c = centroids[idx]
        spans = c.max(axis=0) - c.min(axis=0)
        axis = 0 if spans[0] >= spans[1] else 1
        order = np.argsort(c[:, axis], kind="stable")
        perm[s:e] = idx[order]
        mid = s + (e - s) // 2
        left, right = n_nodes, n_nodes + 1
        n_nodes += 2
        node_left[node] = left
        node_right[node] = right
        stack.append((left, s, mid))
        stack.append((right, mid, e))
    return (node_bbox[:n_nodes].copy(), node_left[:n_nodes].copy(),
            node_right[:n_nodes].copy(), node_start[:n_nodes].copy(),
            node_count[:n_nodes].copy(), perm)


class BoundaryIndex:
    """Edge arrays + AABB tree for one polygon boundary.

    Also precomputes the per-edge inward normals and per-vertex convexity
    flags consumed by the walk kernel's local inside test.
    """

    def __init__(self, vertices: np.ndarray):
        v = np.asarray(vertices, dtype=np.float64)
        w = np.roll(v, -1, axis=0)
        self.ax = np.ascontiguousarray(v[:, 0])
        self.ay = np.ascontiguousarray(v[:, 1])
        self.bx = np.ascontiguousarray(w[:, 0])
        self.by = np.ascontiguousarray(w[:, 1])
        dx = self.bx - self.ax
        dy = self.by - self.ay
        self.elen = np.hypot(dx, dy)
        self.cumarc = np.concatenate(([0.0], np.cumsum(self.elen)))
        # unit inward normal (interior is left of each directed edge)
        self.nix = -dy / self.elen
        self.niy = dx / self.elen
        # vertex i joins edge i-1 to edge i; convex = left turn (CCW)
        pdx = np.roll(dx, 1)
        pdy = np.roll(dy, 1)
        self.vertex_convex = (pdx * dy - pdy * dx) > 0.0
        cent = np.stack([(self.ax + self.bx) * 0.5, (self.ay + self.by) * 0.5], axis=1)
        bboxes = np.stack([
            np.minimum(self.ax, self.bx), np.minimum(self.ay, self.by),
            np.maximum(self.ax, self.bx), np.maximum(self.ay, self.by),
        ], axis=1)
        (self.node_bbox, self.node_left, self.node_right,
         self.node_start, self.node_count, self.perm) = _build_tree(cent, bboxes)
        self._build_near_grid(bboxes)

    def _build_near_grid(self, bboxes):
        # cell size ~ 2 median edge lengths; capped so the table stays small
        n = len(self.ax)
        cell = 1.25 * float(np.median(self.elen))
        minx = float(np.min(bboxes[:, 0]))
        miny = float(np.min(bboxes[:, 1]))
        maxx = float(np.max(bboxes[:, 2]))
        maxy = float(np.max(bboxes[:, 3]))
        span = max(maxx - minx, maxy - miny)
        cell = max(cell, span / 512.0)
        gx0 = minx - cell
        gy0 = miny - cell
        gnx = int((maxx + cell - gx0) / cell) + 2
        gny = int((maxy + cell - gy0) / cell) + 2
        # edge -> every cell overlapping its bbox inflated by one cell size
        ix_lo = np.floor((bboxes[:, 0] - cell - gx0) / cell).astype(np.int64)
        ix_hi = np.floor((bboxes[:, 2] + cell - gx0) / cell).astype(np.int64)
        iy_lo = np.floor((bboxes[:, 1] - cell - gy0) / cell).astype(np.int64)
        iy_hi = np.floor((bboxes[:, 3] + cell - gy0) / cell).astype(np.int64)
        np.clip(ix_lo, 0, gnx - 1, out=ix_lo)
        np.clip(ix_hi, 0, gnx - 1, out=ix_hi)
        np.clip(iy_lo, 0, gny - 1, out=iy_lo)
        np.clip(iy_hi, 0, gny - 1, out=iy_hi)
        cells = []
        items = []
        for i in range(n):
            for cx in range(ix_lo[i], ix_hi[i] + 1):
                base = cx * gny
                for cy in range(iy_lo[i], iy_hi[i] + 1):
                    cells.append(base + cy)
                    items.append(i)
        cells = np.array(cells, dtype=np.int64)
        items = np.array(items, dtype=np.int64)
        order = np.lexsort((items, cells))  # ascending edge id within a cell
        cells = cells[order]
        items = items[order]
        counts = np.bincount(cells, minlength=gnx * gny)
        self.cell_start = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        self.cell_items = items
        self.grid_x0 = gx0
        self.grid_y0 = gy0
        self.grid_cell = cell
        self.grid_nx = gnx
        self.grid_ny = gny

    # -- queries ----------------------------------------------------------
    def nearest(self, x: float, y: float, hint: int = -1):
        return grid_nearest(x, y, self.ax, self.ay, self.bx, self.by,
                            self.grid_x0, self.grid_y0, self.grid_cell,
                            self.grid_nx, self.grid_ny,
                            self.cell_start, self.cell_items,
                            self.node_bbox, self.node_left, self.node_right,
                            self.node_start, self.node_count, self.perm, hint)

    nearest_unchecked = nearest

    def nearest_brute(self, x: float, y: float):
        return brute_nearest(x, y, self.ax, self.ay, self.bx, self.by)

    def inside(self, x: float, y: float) -> bool:
        return bool(crossing_inside(x, y, self.ax, self.ay, self.bx, self.by))
