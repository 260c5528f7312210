"""Rotated rectangular neighborhoods on the pixel lattice and patch distances.

Offsets ``(r, q)`` are integer displacements in ``(i, j)`` image coordinates.
Sizes are normalized by the image side ``n``, so a neighborhood of length
``delta_l`` spans ``n * delta_l`` pixels.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import canonical_angle, check_image, check_sizes

__all__ = [
    "NeighborhoodSpec",
    "rasterize_neighborhood",
    "rasterize_many",
    "OffsetTable",
    "neighborhood_distance",
    "danlm_distance",
    "image_side",
]

# slack on the inclusive rectangle test so lattice points lying exactly on
# an edge survive floating-point rotation
_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class NeighborhoodSpec:
    """A ``delta_l`` (along ``theta``) by ``delta_s`` (across) rectangle."""

    theta: float
    delta_s: float
    delta_l: float

    def __post_init__(self):
        check_sizes(self.delta_s, self.delta_l)
        if not (math.isfinite(self.theta) and 0 <= self.theta < math.pi):
            raise ValueError(f"theta must lie in [0, pi), got {self.theta}")


def image_side(shape):
    """Normalization length used to convert pixel counts to unit sizes."""
    return max(shape)


def _candidate_grid(delta_s, delta_l, n):
    reach = math.ceil(math.hypot(n * delta_l / 2, n * delta_s / 2)) + 1
    r, q = np.meshgrid(np.arange(-reach, reach + 1), np.arange(-reach, reach + 1), indexing="ij")
    return r.ravel(), q.ravel()


def _inclusion(theta, r, q, delta_s, delta_l, n):
    c = np.cos(theta)[..., None]
    s = np.sin(theta)[..., None]
    # rotate the lattice offset by -theta into the rectangle's frame
    x = r * c + q * s
    y = -r * s + q * c
    return (np.abs(x) <= n * delta_l / 2 + _EDGE_EPS) & (np.abs(y) <= n * delta_s / 2 + _EDGE_EPS)


def rasterize_neighborhood(spec, n):
    """Integer offsets whose inverse-rotated position falls in the rectangle.

    Returns a read-only ``(k, 2)`` int array sorted lexicographically. The
    center ``(0, 0)`` is always included.
    """
    r, q = _candidate_grid(spec.delta_s, spec.delta_l, n)
    mask = _inclusion(np.asarray(spec.theta, dtype=np.float64), r, q, spec.delta_s, spec.delta_l, n)
    out = np.stack([r[mask], q[mask]], axis=1).astype(np.int64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class OffsetTable:
    """Several offset sets packed for the compiled kernels.

    Set ``k`` occupies ``offsets[starts[k]:stops[k]]`` with the center
    offset removed; ``reach[k]`` is its largest absolute coordinate.
    """

    offsets: np.ndarray
    starts: np.ndarray
    stops: np.ndarray
    reach: np.ndarray
    has_center: np.ndarray

    @property
    def n_sets(self):
        return len(self.starts)

    def get(self, k, include_center=False):
        body = self.offsets[self.starts[k] : self.stops[k]]
        if include_center and self.has_center[k]:
            return np.vstack([[[0, 0]], body])
        return body


def rasterize_many(thetas, delta_s, delta_l, n):
    """Rasterize one neighborhood per angle and deduplicate equal sets.

    Returns ``(table, index)`` where ``index[m]`` is the set used by
    ``thetas[m]``. Vectorized over angles, so per-pixel angle fields are
    cheap to rasterize.
    """
    delta_s, delta_l = check_sizes(delta_s, delta_l)
    thetas = canonical_angle(np.asarray(thetas, dtype=np.float64).ravel())
    r, q = _candidate_grid(delta_s, delta_l, n)
    uniq_theta, theta_index = np.unique(thetas, return_inverse=True)
    masks = []
    # chunk to bound memory for large per-pixel fields
    for lo in range(0, len(uniq_theta), 8192):
        masks.append(_inclusion(uniq_theta[lo : lo + 8192], r, q, delta_s, delta_l, n))
    masks = np.concatenate(masks, axis=0) if masks else np.zeros((0, r.size), bool)
    uniq_masks, mask_index = np.unique(masks, axis=0, return_inverse=True)
    mask_index = np.asarray(mask_index).ravel()

    center = (r == 0) & (q == 0)
    pieces, starts, stops, reach, has_center = [], [], [], [], []
    pos = 0
    for m in uniq_masks:
        keep = m & ~center
        pts = np.stack([r[keep], q[keep]], axis=1).astype(np.int64)
        pieces.append(pts)
        starts.append(pos)
        pos += len(pts)
        stops.append(pos)
        reach.append(int(np.abs(pts).max()) if len(pts) else 0)
        has_center.append(bool(m[center][0]))
    table = OffsetTable(
        offsets=np.concatenate(pieces) if pieces else np.zeros((0, 2), np.int64),
        starts=np.asarray(starts, np.int64),
        stops=np.asarray(stops, np.int64),
        reach=np.asarray(reach, np.int64),
        has_center=np.asarray(has_center, bool),
    )
    return table, mask_index[theta_index]


def _check_pixel(p, shape, name):
    i, j = (int(v) for v in p)
    if not (0 <= i < shape[0] and 0 <= j < shape[1]):
        raise IndexError(f"{name} {tuple(p)} outside image of shape {shape}")
    return i, j


def neighborhood_distance(obs, p, c, offsets, include_center=False):
    """Mean squared difference between the windows around ``p`` and ``c``.

    Only offsets valid for both pixels contribute and the mean is over
    that surviving set. The center offset is skipped unless
    ``include_center``. With no surviving offsets the distance falls back
    to the squared center difference.
    """
    obs = check_image(obs, "obs")
    pi, pj = _check_pixel(p, obs.shape, "p")
    ci, cj = _check_pixel(c, obs.shape, "c")
    off = np.asarray(offsets, dtype=np.int64).reshape(-1, 2)
    if not include_center:
        off = off[(off[:, 0] != 0) | (off[:, 1] != 0)]
    n1, n2 = obs.shape
    a_i, a_j = pi + off[:, 0], pj + off[:, 1]
    b_i, b_j = ci + off[:, 0], cj + off[:, 1]
    ok = (
        (a_i >= 0) & (a_i < n1) & (a_j >= 0) & (a_j < n2)
        & (b_i >= 0) & (b_i < n1) & (b_j >= 0) & (b_j < n2)
    )
    if not ok.any():
        return float((obs[pi, pj] - obs[ci, cj]) ** 2)
    d = obs[a_i[ok], a_j[ok]] - obs[b_i[ok], b_j[ok]]
    return float(np.sum(d * d) / ok.sum())


def danlm_distance(obs, p, c, specs, include_center=False):
    """Minimum neighborhood distance over several orientations.

    Returns ``(distance, index)``; ties go to the lowest index.
    """
    specs = list(specs)
    if not specs:
        raise ValueError("danlm_distance needs at least one neighborhood spec")
    sizes = {(s.delta_s, s.delta_l) for s in specs}
    if len(sizes) != 1:
        raise ValueError("all specs must share delta_s and delta_l")
    obs = check_image(obs, "obs")
    n = image_side(obs.shape)
    best, best_k = math.inf, -1
    for k, spec in enumerate(specs):
        d = neighborhood_distance(obs, p, c, rasterize_neighborhood(spec, n), include_center)
        if d < best:
            best, best_k = d, k
    return best, best_k
