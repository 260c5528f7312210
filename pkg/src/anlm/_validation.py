"""Input validation helpers shared by the public functions and estimators."""

import math
from numbers import Integral, Real

import numpy as np


def check_image(image, name="image", min_size=1):
    """Return ``image`` as a C-contiguous 2-D float64 array.

    Raises ``ValueError`` for wrong dimensionality, too-small sides or
    non-finite pixels. The input is never modified; a copy is made only
    when dtype or layout requires it.
    """
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < min_size or arr.shape[1] < min_size:
        raise ValueError(f"{name} sides must be >= {min_size}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def check_same_shape(a, b, names=("a", "b")):
    if a.shape != b.shape:
        raise ValueError(
            f"dimension mismatch: {names[0]} has shape {a.shape}, {names[1]} has shape {b.shape}"
        )


def check_angle_field(field, shape, name="orientations"):
    arr = np.asarray(field, dtype=np.float64)
    if arr.shape != tuple(shape):
        raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return np.ascontiguousarray(canonical_angle(arr))


def canonical_angle(theta):
    """Reduce axial angles to ``[0, pi)``."""
    out = np.mod(theta, np.pi)
    # np.mod can return exactly pi for tiny negative inputs
    return np.where(out >= np.pi, 0.0, out)


def check_nonnegative(value, name):
    if not isinstance(value, Real) or isinstance(value, bool) or not math.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return float(value)


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, Integral) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_sizes(delta_s, delta_l):
    for name, v in (("delta_s", delta_s), ("delta_l", delta_l)):
        if not isinstance(v, Real) or isinstance(v, bool) or not math.isfinite(v):
            raise ValueError(f"{name} must be a finite real number, got {v!r}")
    if not 0 < delta_s <= delta_l <= 1:
        raise ValueError(f"need 0 < delta_s <= delta_l <= 1, got delta_s={delta_s}, delta_l={delta_l}")
    return float(delta_s), float(delta_l)
