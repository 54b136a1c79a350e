"""Planar geometry kernels: rects, segment distances, raycasts, boundary extraction.

Everything here is axis-agnostic numpy; wall segments are (x1, y1, x2, y2)
rows and rects are (xmin, ymin, xmax, ymax) rows.
"""

from __future__ import annotations

import numpy as np

EPS = 1e-12


def segs_as_array(segs) -> np.ndarray:
    a = np.asarray(segs, dtype=np.float64).reshape(-1, 4)
    return a


def rect_contains(rect, x: float, y: float, tol: float = 0.0) -> bool:
    x1, y1, x2, y2 = rect
    return (x1 - tol <= x <= x2 + tol) and (y1 - tol <= y <= y2 + tol)


def rects_contain(rects: np.ndarray, x: float, y: float, tol: float = 0.0) -> np.ndarray:
    """Boolean mask over rects (R, 4) that contain the point."""
    r = np.asarray(rects, dtype=np.float64).reshape(-1, 4)
    return (
        (r[:, 0] - tol <= x) & (x <= r[:, 2] + tol)
        & (r[:, 1] - tol <= y) & (y <= r[:, 3] + tol)
    )


def point_seg_distances(point, segs: np.ndarray):
    """Distance from one point to each segment.

    Returns (dist (N,), closest (N, 2)).
    """
    p = np.asarray(point, dtype=np.float64)
    s = segs_as_array(segs)
    a = s[:, 0:2]
    e = s[:, 2:4] - a
    ee = np.einsum("ij,ij->i", e, e)
    ee = np.where(ee < EPS, 1.0, ee)  # degenerate segs act as points
    t = np.einsum("ij,ij->i", p[None, :] - a, e) / ee
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[:, None] * e
    d = np.hypot(closest[:, 0] - p[0], closest[:, 1] - p[1])
    return d, closest


def min_seg_distances(points, segs: np.ndarray) -> np.ndarray:
    """Distance from each of P points to the nearest of N segments, (P,)."""
    p = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    s = segs_as_array(segs)
    a = s[:, 0:2]
    e = s[:, 2:4] - a
    ee = np.einsum("ij,ij->i", e, e)
    ee = np.where(ee < EPS, 1.0, ee)
    diff = p[:, None, :] - a[None, :, :]                    # (P, N, 2)
    t = np.clip(np.einsum("pnj,nj->pn", diff, e) / ee[None, :], 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * e[None, :, :]
    d = np.hypot(closest[:, :, 0] - p[:, None, 0], closest[:, :, 1] - p[:, None, 1])
    return d.min(axis=1)


def raycast(origins: np.ndarray, dirs: np.ndarray, segs: np.ndarray,
            active: np.ndarray | None = None):
    """Cast R rays against N segments.

    origins/dirs are (R, 2); dirs need not be unit length (t is in units of
    |dir|, so pass unit vectors for metric distances). Returns
    (t (R,), seg_index (R,), u (R,)) where t is inf and seg_index -1 for
    rays that hit nothing. u is the hit's parameter along the segment.
    """
    o = np.asarray(origins, dtype=np.float64).reshape(-1, 2)
    d = np.asarray(dirs, dtype=np.float64).reshape(-1, 2)
    s = segs_as_array(segs)
    a = s[:, 0:2]
    e = s[:, 2:4] - a

    ao = a[None, :, :] - o[:, None, :]                      # (R, N, 2)
    denom = d[:, None, 0] * e[None, :, 1] - d[:, None, 1] * e[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ao[:, :, 0] * e[None, :, 1] - ao[:, :, 1] * e[None, :, 0]) / denom
        u = (ao[:, :, 0] * d[:, None, 1] - ao[:, :, 1] * d[:, None, 0]) / denom
    ok = (np.abs(denom) > EPS) & (t >= -EPS) & (u >= -EPS) & (u <= 1.0 + EPS)
    if active is not None:
        ok &= np.asarray(active, dtype=bool)[None, :]
    t = np.where(ok, t, np.inf)
    idx = np.argmin(t, axis=1)
    tmin = t[np.arange(t.shape[0]), idx]
    umin = u[np.arange(t.shape[0]), idx]
    idx = np.where(np.isfinite(tmin), idx, -1)
    umin = np.where(np.isfinite(tmin), np.clip(umin, 0.0, 1.0), 0.0)
    return tmin, idx, umin


def raycast_from(origin, dirs: np.ndarray, segs: np.ndarray,
                 active: np.ndarray | None = None):
    """raycast() specialised to a shared origin; same return contract.

    Avoids the (R, N, 2) temporaries of the general form, which matters in
    the per-step sensing loop.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(dirs, dtype=np.float64).reshape(-1, 2)
    s = segs_as_array(segs)
    ex = s[:, 2] - s[:, 0]
    ey = s[:, 3] - s[:, 1]
    aox = s[:, 0] - o[0]
    aoy = s[:, 1] - o[1]
    cross_ae = aox * ey - aoy * ex                          # (N,)
    dx = d[:, 0][:, None]
    dy = d[:, 1][:, None]
    denom = dx * ey[None, :] - dy * ex[None, :]             # (R, N)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross_ae[None, :] / denom
        u = (aox[None, :] * dy - aoy[None, :] * dx) / denom
    ok = (np.abs(denom) > EPS) & (t >= -EPS) & (u >= -EPS) & (u <= 1.0 + EPS)
    if active is not None:
        ok &= np.asarray(active, dtype=bool)[None, :]
    t = np.where(ok, t, np.inf)
    idx = t.argmin(axis=1)
    rows = np.arange(t.shape[0])
    tmin = t[rows, idx]
    umin = u[rows, idx]
    finite = np.isfinite(tmin)
    idx = np.where(finite, idx, -1)
    umin = np.where(finite, np.minimum(np.maximum(umin, 0.0), 1.0), 0.0)
    return tmin, idx, umin


def _snap_unique(values, tol: float = 1e-9) -> np.ndarray:
    v = np.sort(np.asarray(values, dtype=np.float64))
    keep = [v[0]]
    for x in v[1:]:
        if x - keep[-1] > tol:
            keep.append(x)
    return np.asarray(keep)


def walls_from_free_rects(rects) -> np.ndarray:
    """Boundary segments of a union of axis-aligned free-space rects.

    Builds the cell complex induced by all rect edges, marks free cells, and
    emits maximal merged segments between free and blocked territory. The
    result is the exact wall set enclosing the free space.
    """
    r = np.asarray(rects, dtype=np.float64).reshape(-1, 4)
    xs = _snap_unique(np.concatenate([r[:, 0], r[:, 2]]))
    ys = _snap_unique(np.concatenate([r[:, 1], r[:, 3]]))
    nx, ny = len(xs) - 1, len(ys) - 1
    cx = (xs[:-1] + xs[1:]) / 2.0
    cy = (ys[:-1] + ys[1:]) / 2.0
    free = np.zeros((nx, ny), dtype=bool)
    for i in range(nx):
        inx = (r[:, 0] <= cx[i]) & (cx[i] <= r[:, 2])
        if not inx.any():
            continue
        sub = r[inx]
        for j in range(ny):
            free[i, j] = bool(((sub[:, 1] <= cy[j]) & (cy[j] <= sub[:, 3])).any())

    walls: list[tuple[float, float, float, float]] = []

    # vertical boundaries at each xs[i], merged over contiguous j runs
    for i in range(nx + 1):
        left = free[i - 1, :] if i > 0 else np.zeros(ny, dtype=bool)
        right = free[i, :] if i < nx else np.zeros(ny, dtype=bool)
        edge = left != right
        j = 0
        while j < ny:
            if edge[j]:
                j0 = j
                while j < ny and edge[j]:
                    j += 1
                walls.append((xs[i], ys[j0], xs[i], ys[j]))
            else:
                j += 1

    # horizontal boundaries at each ys[j]
    for j in range(ny + 1):
        below = free[:, j - 1] if j > 0 else np.zeros(nx, dtype=bool)
        above = free[:, j] if j < ny else np.zeros(nx, dtype=bool)
        edge = below != above
        i = 0
        while i < nx:
            if edge[i]:
                i0 = i
                while i < nx and edge[i]:
                    i += 1
                walls.append((xs[i0], ys[j], xs[i], ys[j]))
            else:
                i += 1

    return np.asarray(walls, dtype=np.float64).reshape(-1, 4)


def point_in_free_space(rects, x: float, y: float, tol: float = 0.0) -> bool:
    return bool(rects_contain(rects, x, y, tol).any())
