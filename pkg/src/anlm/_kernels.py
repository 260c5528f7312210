"""Compiled per-pixel loops for the thresholded nonlocal averages.

Each pixel accumulates patch distances for its whole search window at once
(offset-major, candidate-minor, so the inner loop runs over contiguous
memory), then sums accepted candidates in a fixed order. Pixels are reduced
independently, so the result does not depend on the number of threads.
"""

import numba
import numpy as np
from numba import njit, prange

# the TBB layer shipped here is too old and warns on first use
numba.config.THREADING_LAYER = "workqueue"


@njit(cache=True)
def _set_distances(obs, pi, pj, i0, i1, j0, j1, offsets, start, stop, reach, center, dist, count):
    """Fill ``dist``/``count`` for every candidate in the window ``[i0..i1] x [j0..j1]``.

    Offsets are accumulated in table order, so each candidate's sum matches a
    straightforward per-pair loop term by term.
    """
    n1, n2 = obs.shape
    wi = i1 - i0 + 1
    wj = j1 - j0 + 1
    # every offset is valid for p and all candidates: counts are uniform
    interior = (
        pi - reach >= 0 and pi + reach < n1 and pj - reach >= 0 and pj + reach < n2
        and i0 - reach >= 0 and i1 + reach < n1 and j0 - reach >= 0 and j1 + reach < n2
    )
    for a in range(wi):
        for b in range(wj):
            dist[a, b] = 0.0
            count[a, b] = stop - start if interior else 0
    for k in range(start, stop):
        r = offsets[k, 0]
        q = offsets[k, 1]
        ai = pi + r
        aj = pj + q
        if ai < 0 or ai >= n1 or aj < 0 or aj >= n2:
            continue
        v = obs[ai, aj]
        # candidates c with c + (r, q) inside the image
        lo_i = max(i0, -r)
        hi_i = min(i1, n1 - 1 - r)
        lo_j = max(j0, -q)
        hi_j = min(j1, n2 - 1 - q)
        if interior:
            for ci in range(lo_i, hi_i + 1):
                row = obs[ci + r, lo_j + q : hi_j + q + 1]
                drow = dist[ci - i0, lo_j - j0 : hi_j - j0 + 1]
                for b in range(hi_j - lo_j + 1):
                    d = v - row[b]
                    drow[b] += d * d
        else:
            for ci in range(lo_i, hi_i + 1):
                row = obs[ci + r]
                drow = dist[ci - i0]
                crow = count[ci - i0]
                for cj in range(lo_j, hi_j + 1):
                    d = v - row[cj + q]
                    drow[cj - j0] += d * d
                    crow[cj - j0] += 1
    p0 = obs[pi, pj]
    for a in range(wi):
        for b in range(wj):
            d = p0 - obs[i0 + a, j0 + b]
            if center:
                dist[a, b] = (d * d + dist[a, b]) / (count[a, b] + 1)
            elif count[a, b] == 0:
                dist[a, b] = d * d
            else:
                dist[a, b] = dist[a, b] / count[a, b]


@njit(parallel=True, cache=True)
def nonlocal_average(obs, offsets, starts, stops, reach, centers, pixel_sets, radius, thr):
    """Thresholded nonlocal mean with per-pixel candidate offset sets.

    ``pixel_sets[i, j, :]`` lists the offset sets tried for pixel ``(i, j)``;
    a candidate gets weight 1 when the minimum distance over them is within
    ``thr``. ``radius < 0`` searches the whole image.
    """
    n1, n2 = obs.shape
    m = pixel_sets.shape[2]
    out = np.empty((n1, n2))
    span_i = n1 if radius < 0 else min(2 * radius + 1, n1)
    span_j = n2 if radius < 0 else min(2 * radius + 1, n2)
    for flat in prange(n1 * n2):
        pi = flat // n2
        pj = flat % n2
        if radius < 0:
            i0, i1, j0, j1 = 0, n1 - 1, 0, n2 - 1
        else:
            i0 = max(pi - radius, 0)
            i1 = min(pi + radius, n1 - 1)
            j0 = max(pj - radius, 0)
            j1 = min(pj + radius, n2 - 1)
        best = np.empty((span_i, span_j))
        dist = np.empty((span_i, span_j))
        count = np.empty((span_i, span_j), dtype=np.int64)
        for s in range(m):
            k = pixel_sets[pi, pj, s]
            _set_distances(obs, pi, pj, i0, i1, j0, j1, offsets, starts[k], stops[k],
                           reach[k], centers[k], dist, count)
            for a in range(i1 - i0 + 1):
                for b in range(j1 - j0 + 1):
                    if s == 0 or dist[a, b] < best[a, b]:
                        best[a, b] = dist[a, b]
        # accumulate deviations from the pixel itself: exact on flat patches
        p0 = obs[pi, pj]
        num = 0.0
        den = 0.0
        for ci in range(i0, i1 + 1):
            for cj in range(j0, j1 + 1):
                if best[ci - i0, cj - j0] <= thr or (ci == pi and cj == pj):
                    num += obs[ci, cj] - p0
                    den += 1.0
        out[pi, pj] = p0 + num / den
    return out


def run(obs, table, pixel_sets, radius, thr, include_center, threads=None):
    centers = table.has_center & bool(include_center)
    offsets = np.ascontiguousarray(table.offsets, dtype=np.int64)
    if offsets.shape[0] == 0:
        offsets = np.zeros((1, 2), np.int64)
    pixel_sets = np.ascontiguousarray(pixel_sets, dtype=np.int64)
    args = (obs, offsets, table.starts, table.stops, table.reach, centers, pixel_sets, -1 if radius is None else int(radius), float(thr))
    if threads is None:
        return nonlocal_average(*args)
    previous = numba.get_num_threads()
    numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    try:
        return nonlocal_average(*args)
    finally:
        numba.set_num_threads(previous)
