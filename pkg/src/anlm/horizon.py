"""Horizon-class scenes: edge contours, rendering and oracle orientations."""

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from ._validation import canonical_angle, check_image, check_nonnegative
from .image import from_rows, make_rng, to_rows

__all__ = [
    "ContourConstraintError",
    "EdgeContour",
    "make_contour",
    "contour_from_json",
    "contour_to_json",
    "render_horizon",
    "oracle_orientations",
    "perturb_orientations",
    "write_orientations",
    "read_orientations",
]

FAMILIES = ("constant", "line", "sine", "quadratic")

_SIDECAR_MAGIC = b"ANLMORNT"
_SLOPE_TOL = 1e-12
_CURV_TOL = 1e-9
_RANGE_TOL = 1e-12


class ContourConstraintError(ValueError):
    """An edge contour leaves the frame or violates a derivative bound."""


@dataclass(frozen=True)
class EdgeContour:
    """Edge contour ``h`` on ``[0, 1]`` with its first two derivatives.

    ``params`` by family:

    * constant: ``c``
    * line: ``intercept``, ``slope``
    * sine: ``offset``, ``amplitude``, ``frequency``, optional ``phase``
    * quadratic: ``a``, ``b``, ``c`` for ``a + b*t + c*t**2``
    """

    family: str
    params: dict = field(hash=False)
    hoelder_C: float

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        p = self.params
        if self.family == "constant":
            return np.full_like(t, p["c"])
        if self.family == "line":
            return p["intercept"] + p["slope"] * t
        if self.family == "sine":
            w = 2 * math.pi * p["frequency"]
            return p["offset"] + p["amplitude"] * np.sin(w * t + p.get("phase", 0.0))
        return p["a"] + p["b"] * t + p["c"] * t * t

    def derivative(self, t):
        t = np.asarray(t, dtype=np.float64)
        p = self.params
        if self.family == "constant":
            return np.zeros_like(t)
        if self.family == "line":
            return np.full_like(t, p["slope"])
        if self.family == "sine":
            w = 2 * math.pi * p["frequency"]
            return p["amplitude"] * w * np.cos(w * t + p.get("phase", 0.0))
        return p["b"] + 2 * p["c"] * t

    def second_derivative(self, t):
        t = np.asarray(t, dtype=np.float64)
        p = self.params
        if self.family in ("constant", "line"):
            return np.zeros_like(t)
        if self.family == "sine":
            w = 2 * math.pi * p["frequency"]
            return -p["amplitude"] * w * w * np.sin(w * t + p.get("phase", 0.0))
        return np.full_like(t, 2 * p["c"])

    def to_dict(self):
        return {"family": self.family, "params": dict(self.params), "C": self.hoelder_C}


_REQUIRED = {
    "constant": ("c",),
    "line": ("intercept", "slope"),
    "sine": ("offset", "amplitude", "frequency"),
    "quadratic": ("a", "b", "c"),
}


def make_contour(family, params, hoelder_C, n=1024):
    """Build an :class:`EdgeContour` after checking it belongs to the class.

    The contour must stay in ``[0, 1]``, have ``|h'| <= 1`` and
    ``|h''| <= hoelder_C``. Constant and line contours are checked
    analytically; sine and quadratic ones by sampling ``10 * n`` points.

    Raises
    ------
    ContourConstraintError
        Naming the violated bound.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown contour family {family!r}; expected one of {FAMILIES}")
    params = dict(params)
    missing = [k for k in _REQUIRED[family] if k not in params]
    if missing:
        raise ValueError(f"{family} contour needs parameters {missing}")
    allowed = set(_REQUIRED[family]) | ({"phase"} if family == "sine" else set())
    extra = set(params) - allowed
    if extra:
        raise ValueError(f"unexpected {family} parameters {sorted(extra)}")
    for k, v in params.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise ValueError(f"parameter {k} must be a finite number, got {v!r}")
        params[k] = float(v)
    hoelder_C = check_nonnegative(hoelder_C, "hoelder_C")
    contour = EdgeContour(family, params, hoelder_C)

    if family in ("constant", "line"):
        t = np.array([0.0, 1.0])
    else:
        t = np.linspace(0.0, 1.0, 10 * int(n))
    h = contour(t)
    if h.min() < -_RANGE_TOL or h.max() > 1 + _RANGE_TOL:
        raise ContourConstraintError(
            f"range: h leaves [0, 1] (min {h.min():.6g}, max {h.max():.6g})"
        )
    slope = np.abs(contour.derivative(t)).max()
    if slope > 1 + _SLOPE_TOL:
        raise ContourConstraintError(f"|h'|>1: max |h'| = {slope:.6g}")
    curv = np.abs(contour.second_derivative(t)).max()
    if curv > hoelder_C + _CURV_TOL:
        raise ContourConstraintError(f"|h''|>C: max |h''| = {curv:.6g} exceeds C = {hoelder_C:.6g}")
    return contour


def contour_from_json(obj, n=1024):
    """Build a contour from ``{"family", "params", "C"}`` (dict or JSON text)."""
    if isinstance(obj, (str, bytes)):
        obj = json.loads(obj)
    try:
        return make_contour(obj["family"], obj["params"], obj["C"], n=n)
    except KeyError as exc:
        raise TypeError(f"contour JSON is missing key {exc}") from None


def contour_to_json(contour):
    return json.dumps(contour.to_dict(), sort_keys=True)


def render_horizon(contour, n):
    """Binary ``n x n`` image with ``img[i, j] = 1`` iff ``j/n < h(i/n)``."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    t = np.arange(n) / n
    h = contour(t)
    return (t[None, :] < h[:, None]).astype(np.float64)


def oracle_orientations(contour, n):
    """Edge tangent angle ``arctan(h'(i/n)) mod pi``, constant down each column."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    theta = canonical_angle(np.arctan(contour.derivative(np.arange(n) / n)))
    return np.ascontiguousarray(np.repeat(theta[:, None], n, axis=1))


def perturb_orientations(field, mode, magnitude, seed):
    """Add bounded uniform angle errors to an orientation field.

    ``additive`` draws ``u ~ U[-magnitude, magnitude]``; ``relative`` draws
    ``u ~ U[-magnitude*|theta|, magnitude*|theta|]``. Each pixel gets its
    own draw; the result is reduced mod pi.
    """
    theta = np.asarray(field, dtype=np.float64)
    magnitude = check_nonnegative(magnitude, "magnitude")
    if mode not in ("additive", "relative"):
        raise ValueError(f"mode must be 'additive' or 'relative', got {mode!r}")
    if magnitude == 0:
        return theta.copy()
    u = make_rng(seed).uniform(-1.0, 1.0, size=theta.shape)
    scale = magnitude if mode == "additive" else magnitude * np.abs(theta)
    return canonical_angle(theta + u * scale)


def write_orientations(field, path):
    """Write the binary sidecar: ``ANLMORNT``, u32 width, u32 height, f64 rows.

    All integers and floats are little-endian; rows run top-to-bottom like
    the PGM raster.
    """
    arr = check_image(field, "orientations")
    rows = to_rows(arr)
    height, width = rows.shape
    with open(path, "wb") as fh:
        fh.write(_SIDECAR_MAGIC + struct.pack("<II", width, height))
        fh.write(rows.astype("<f8").tobytes())


def read_orientations(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16 or data[:8] != _SIDECAR_MAGIC:
        raise ValueError(f"{path}: not an orientation sidecar")
    width, height = struct.unpack("<II", data[8:16])
    expected = 16 + 8 * width * height
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(data)}")
    rows = np.frombuffer(data, dtype="<f8", offset=16).reshape(height, width)
    return from_rows(rows)
