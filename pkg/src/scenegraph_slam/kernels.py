"""Hot numeric kernels.

Each kernel exists twice: a numba ``@njit`` loop and a vectorised numpy
fallback.  Both evaluate the same floating-point expressions in the same
order, so they agree bit-for-bit on the quantities the pipeline consumes
(inlier counts, voxel centroids, occlusion flags).  The public functions
dispatch on ``JIT_ENABLED`` unless ``use_jit`` is given explicitly.
"""

from __future__ import annotations

import numpy as np

from ._jit import JIT_ENABLED, njit

DEGENERATE_CROSS = 1e-10

# --------------------------------------------------------------------------
# RANSAC hypothesis scoring
# --------------------------------------------------------------------------


@njit(cache=True)
def _ransac_best_jit(points, samples, tol):
    n_pts = points.shape[0]
    best = -1
    best_count = -1
    for h in range(samples.shape[0]):
        i, j, k = samples[h, 0], samples[h, 1], samples[h, 2]
        ax = points[j, 0] - points[i, 0]
        ay = points[j, 1] - points[i, 1]
        az = points[j, 2] - points[i, 2]
        bx = points[k, 0] - points[i, 0]
        by = points[k, 1] - points[i, 1]
        bz = points[k, 2] - points[i, 2]
        nx = ay * bz - az * by
        ny = az * bx - ax * bz
        nz = ax * by - ay * bx
        norm = np.sqrt(nx * nx + ny * ny + nz * nz)
        if norm < DEGENERATE_CROSS:
            continue
        nx /= norm
        ny /= norm
        nz /= norm
        d = -(nx * points[i, 0] + ny * points[i, 1] + nz * points[i, 2])
        count = 0
        for p in range(n_pts):
            r = points[p, 0] * nx + points[p, 1] * ny + points[p, 2] * nz + d
            if abs(r) <= tol:
                count += 1
        if count > best_count:
            best_count = count
            best = h
    return best, best_count


def _ransac_best_numpy(points, samples, tol, chunk=64):
    best = -1
    best_count = -1
    px = points[:, 0][:, None]
    py = points[:, 1][:, None]
    pz = points[:, 2][:, None]
    for start in range(0, samples.shape[0], chunk):
        s = samples[start : start + chunk]
        pi, pj, pk = points[s[:, 0]], points[s[:, 1]], points[s[:, 2]]
        ax, ay, az = (pj - pi).T
        bx, by, bz = (pk - pi).T
        nx = ay * bz - az * by
        ny = az * bx - ax * bz
        nz = ax * by - ay * bx
        norm = np.sqrt(nx * nx + ny * ny + nz * nz)
        ok = norm >= DEGENERATE_CROSS
        safe = np.where(ok, norm, 1.0)
        nx, ny, nz = nx / safe, ny / safe, nz / safe
        d = -(nx * pi[:, 0] + ny * pi[:, 1] + nz * pi[:, 2])
        r = px * nx + py * ny + pz * nz + d
        counts = np.count_nonzero(np.abs(r) <= tol, axis=0)
        counts = np.where(ok, counts, -1)
        h = int(np.argmax(counts))
        if counts[h] > best_count:
            best_count = int(counts[h])
            best = start + h
    if best_count < 0:
        return -1, -1
    return best, best_count


def ransac_best_hypothesis(points, samples, tol, use_jit=None):
    """Score 3-point plane hypotheses; return ``(index, inlier_count)``.

    Degenerate (collinear) samples are skipped; ``(-1, -1)`` means every
    sample was degenerate.  Ties keep the earliest hypothesis.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    samples = np.ascontiguousarray(samples, dtype=np.int64)
    if samples.shape[0] == 0:
        return -1, -1
    jit = JIT_ENABLED if use_jit is None else use_jit
    if jit:
        b, c = _ransac_best_jit(points, samples, float(tol))
        return int(b), int(c)
    return _ransac_best_numpy(points, samples, float(tol))


# --------------------------------------------------------------------------
# Voxel-grid centroids
# --------------------------------------------------------------------------


def _voxel_keys(points, leaf):
    idx = np.floor(points / leaf).astype(np.int64)
    idx -= idx.min(axis=0)
    span = idx.max(axis=0) + 1
    return (idx[:, 0] * span[1] + idx[:, 1]) * span[2] + idx[:, 2]


@njit(cache=True)
def _voxel_reduce_jit(points, keys, order):
    n = keys.shape[0]
    out = np.empty((n, 3))
    m = -1
    count = 0
    prev = -1
    sx = sy = sz = 0.0
    for t in range(n):
        p = order[t]
        k = keys[p]
        if t == 0 or k != prev:
            if t > 0:
                out[m, 0] = sx / count
                out[m, 1] = sy / count
                out[m, 2] = sz / count
            m += 1
            sx = sy = sz = 0.0
            count = 0
            prev = k
        sx += points[p, 0]
        sy += points[p, 1]
        sz += points[p, 2]
        count += 1
    out[m, 0] = sx / count
    out[m, 1] = sy / count
    out[m, 2] = sz / count
    return out[: m + 1]


@njit(cache=True)
def _voxel_reduce_dense_jit(points, keys, nbins):
    sums = np.zeros((nbins, 3))
    counts = np.zeros(nbins, dtype=np.int64)
    for p in range(keys.shape[0]):
        k = keys[p]
        sums[k, 0] += points[p, 0]
        sums[k, 1] += points[p, 1]
        sums[k, 2] += points[p, 2]
        counts[k] += 1
    m = 0
    for k in range(nbins):
        if counts[k] > 0:
            m += 1
    out = np.empty((m, 3))
    j = 0
    for k in range(nbins):
        if counts[k] > 0:
            out[j, 0] = sums[k, 0] / counts[k]
            out[j, 1] = sums[k, 1] / counts[k]
            out[j, 2] = sums[k, 2] / counts[k]
            j += 1
    return out


def _voxel_reduce_numpy(points, keys):
    _, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    m = counts.shape[0]
    out = np.empty((m, 3))
    for axis in range(3):
        out[:, axis] = np.bincount(inverse, weights=points[:, axis], minlength=m) / counts
    return out


def voxel_centroids(points, leaf, use_jit=None):
    """Centroid of the points falling in each occupied voxel, sorted by voxel key."""
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    if points.shape[0] == 0:
        return points.copy()
    keys = _voxel_keys(points, leaf)
    jit = JIT_ENABLED if use_jit is None else use_jit
    if jit:
        nbins = int(keys.max()) + 1
        if nbins <= 8 * keys.shape[0]:
            return _voxel_reduce_dense_jit(points, keys, nbins)
        # numba's own sort is slow; the stable numpy sort keeps per-voxel summation order
        return _voxel_reduce_jit(points, keys, np.argsort(keys, kind="stable"))
    return _voxel_reduce_numpy(points, keys)


# --------------------------------------------------------------------------
# Occlusion by vertical wall panels
# --------------------------------------------------------------------------

_S_MIN = 1e-9
_S_MAX = 1.0 - 1e-6


@njit(cache=True)
def _occluded_jit(points, owner, cam, panels):
    n = points.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        dx = points[i, 0] - cam[0]
        dy = points[i, 1] - cam[1]
        dz = points[i, 2] - cam[2]
        for w in range(panels.shape[0]):
            if w == owner[i]:
                continue
            ex = panels[w, 2] - panels[w, 0]
            ey = panels[w, 3] - panels[w, 1]
            den = dx * ey - dy * ex
            if abs(den) < 1e-12:
                continue
            qx = panels[w, 0] - cam[0]
            qy = panels[w, 1] - cam[1]
            s = (qx * ey - qy * ex) / den
            u = (qx * dy - qy * dx) / den
            if s <= _S_MIN or s >= _S_MAX or u < 0.0 or u > 1.0:
                continue
            z = cam[2] + s * dz
            if z >= panels[w, 4] and z <= panels[w, 5]:
                out[i] = True
                break
    return out


def _occluded_numpy(points, owner, cam, panels):
    dx = (points[:, 0] - cam[0])[:, None]
    dy = (points[:, 1] - cam[1])[:, None]
    dz = (points[:, 2] - cam[2])[:, None]
    ex = panels[:, 2] - panels[:, 0]
    ey = panels[:, 3] - panels[:, 1]
    qx = panels[:, 0] - cam[0]
    qy = panels[:, 1] - cam[1]
    den = dx * ey - dy * ex
    ok = np.abs(den) >= 1e-12
    safe = np.where(ok, den, 1.0)
    s = (qx * ey - qy * ex) / safe
    u = (qx * dy - qy * dx) / safe
    z = cam[2] + s * dz
    hit = (
        ok
        & (s > _S_MIN)
        & (s < _S_MAX)
        & (u >= 0.0)
        & (u <= 1.0)
        & (z >= panels[:, 4])
        & (z <= panels[:, 5])
    )
    hit &= np.arange(panels.shape[0])[None, :] != owner[:, None]
    return hit.any(axis=1)


def occluded(points, owner, cam, panels, use_jit=None):
    """Flag points whose line of sight from ``cam`` crosses a wall panel.

    ``panels`` rows are ``[x0, y0, x1, y1, z_lo, z_hi]`` (vertical
    rectangles); ``owner[i]`` is the panel point ``i`` lies on, or -1.
    """
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    owner = np.ascontiguousarray(owner, dtype=np.int64)
    cam = np.ascontiguousarray(cam, dtype=np.float64)
    panels = np.ascontiguousarray(panels, dtype=np.float64).reshape(-1, 6)
    if points.shape[0] == 0 or panels.shape[0] == 0:
        return np.zeros(points.shape[0], dtype=bool)
    jit = JIT_ENABLED if use_jit is None else use_jit
    if jit:
        return _occluded_jit(points, owner, cam, panels)
    return _occluded_numpy(points, owner, cam, panels)


# --------------------------------------------------------------------------
# Point-to-segment clearance in the ground plane
# --------------------------------------------------------------------------


@njit(cache=True)
def _segment_clearance_jit(cells, segs):
    m = cells.shape[0]
    out = np.full(m, np.inf)
    for i in range(m):
        best = np.inf
        for w in range(segs.shape[0]):
            ex = segs[w, 2] - segs[w, 0]
            ey = segs[w, 3] - segs[w, 1]
            qx = cells[i, 0] - segs[w, 0]
            qy = cells[i, 1] - segs[w, 1]
            ll = ex * ex + ey * ey
            t = 0.0
            if ll > 0.0:
                t = (qx * ex + qy * ey) / ll
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            rx = qx - t * ex
            ry = qy - t * ey
            dist = np.sqrt(rx * rx + ry * ry)
            if dist < best:
                best = dist
        out[i] = best
    return out


def _segment_clearance_numpy(cells, segs):
    ex = segs[:, 2] - segs[:, 0]
    ey = segs[:, 3] - segs[:, 1]
    qx = cells[:, 0][:, None] - segs[:, 0]
    qy = cells[:, 1][:, None] - segs[:, 1]
    ll = ex * ex + ey * ey
    safe = np.where(ll > 0.0, ll, 1.0)
    t = np.where(ll > 0.0, np.clip((qx * ex + qy * ey) / safe, 0.0, 1.0), 0.0)
    rx = qx - t * ex
    ry = qy - t * ey
    return np.sqrt(rx * rx + ry * ry).min(axis=1)


def segment_clearance(cells, segs, use_jit=None):
    """Distance from each 2D cell centre to the nearest segment ``[x0, y0, x1, y1]``."""
    cells = np.ascontiguousarray(cells, dtype=np.float64).reshape(-1, 2)
    segs = np.ascontiguousarray(segs, dtype=np.float64).reshape(-1, 4)
    if segs.shape[0] == 0:
        return np.full(cells.shape[0], np.inf)
    if cells.shape[0] == 0:
        return np.zeros(0)
    jit = JIT_ENABLED if use_jit is None else use_jit
    if jit:
        return _segment_clearance_jit(cells, segs)
    return _segment_clearance_numpy(cells, segs)
