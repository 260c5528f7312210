"""Mean filter, NLM and the anisotropic NLM family (oriented, discrete-angle,
gradient-based) with binary similarity weights."""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from . import _kernels
from ._validation import (
    canonical_angle,
    check_angle_field,
    check_image,
    check_nonnegative,
    check_same_shape,
    check_sizes,
)
from .geometry import rasterize_many, image_side

__all__ = [
    "DenoiseParams",
    "GradientField",
    "weight",
    "denoise_oriented",
    "nlm",
    "danlm",
    "estimate_gradients",
    "edge_angles",
    "pilot_gradients",
    "ganlm",
    "mean_filter",
    "DEFAULT_TAU_FACTOR",
]

DEFAULT_TAU_FACTOR = 2.7
DEFAULT_GRADIENT_SIGMA = 2.0
DEFAULT_ANGLES = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)


@dataclass(frozen=True)
class DenoiseParams:
    """Neighborhood sizes, threshold and search settings.

    Parameters
    ----------
    delta_s, delta_l : float
        Neighborhood width and length as fractions of the image side.
    xi : float
        Assumed noise standard deviation.
    tau : float, optional
        Threshold parameter; the weight cutoff is ``2*xi**2 + tau``.
        Defaults to ``2.7 * xi**2``.
    search_radius : int or None
        Chebyshev radius of the candidate window in pixels; ``None``
        searches the whole image.
    angles : tuple of float
        Orientation grid used by :func:`danlm`.
    center_inclusion : bool
        Include the center offset in patch distances.
    """

    delta_s: float
    delta_l: float
    xi: float
    tau: float = None
    search_radius: int = 21
    angles: tuple = field(default=DEFAULT_ANGLES)
    center_inclusion: bool = False

    def __post_init__(self):
        check_sizes(self.delta_s, self.delta_l)
        xi = check_nonnegative(self.xi, "xi")
        tau = DEFAULT_TAU_FACTOR * xi * xi if self.tau is None else check_nonnegative(self.tau, "tau")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "tau", tau)
        radius = self.search_radius
        if radius == "full":
            radius = None
        if radius is not None:
            if isinstance(radius, bool) or int(radius) != radius or radius < 0:
                raise ValueError(f"search_radius must be a nonnegative integer or 'full', got {radius!r}")
            radius = int(radius)
        object.__setattr__(self, "search_radius", radius)
        angles = tuple(float(a) for a in self.angles)
        if any(not (0 <= a < math.pi) for a in angles):
            raise ValueError(f"angles must lie in [0, pi), got {angles}")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "center_inclusion", bool(self.center_inclusion))

    @property
    def threshold(self):
        return 2 * self.xi * self.xi + self.tau

    @property
    def nlm_side(self):
        """Side of the square NLM neighborhood, ``sqrt(delta_s * delta_l)``."""
        return math.sqrt(self.delta_s * self.delta_l)

    def to_dict(self):
        d = asdict(self)
        d["angles"] = list(self.angles)
        if d["search_radius"] is None:
            d["search_radius"] = "full"
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise TypeError(f"unknown DenoiseParams fields {sorted(unknown)}")
        if "angles" in d:
            d["angles"] = tuple(d["angles"])
        return cls(**d)


@dataclass(frozen=True)
class GradientField:
    gh: np.ndarray
    gv: np.ndarray
    magnitude: np.ndarray
    angle: np.ndarray


def weight(d2, params):
    """Binary similarity weight: 1 iff ``d2 <= 2*xi**2 + tau``."""
    if d2 < 0:
        raise ValueError(f"distance must be >= 0, got {d2}")
    return 1 if d2 <= params.threshold else 0


def _average(obs, thetas_per_pixel, delta_s, delta_l, params, threads):
    """Run the kernel with ``thetas_per_pixel`` of shape ``(n1, n2, m)``."""
    n = image_side(obs.shape)
    table, index = rasterize_many(thetas_per_pixel, delta_s, delta_l, n)
    pixel_sets = index.reshape(thetas_per_pixel.shape)
    return _kernels.run(obs, table, pixel_sets, params.search_radius, params.threshold,
                        params.center_inclusion, threads)


def denoise_oriented(obs, field, params, threads=None):
    """Oriented ANLM: each pixel compares ``delta_s x delta_l`` rectangles
    rotated to its own angle ``field[i, j]``; candidates are compared with
    the same orientation."""
    obs = check_image(obs, "obs")
    theta = check_angle_field(field, obs.shape)
    return _average(obs, theta[:, :, None], params.delta_s, params.delta_l, params, threads)


def nlm(obs, params, threads=None):
    """Isotropic NLM with square neighborhoods of side ``sqrt(delta_s*delta_l)``."""
    obs = check_image(obs, "obs")
    side = params.nlm_side
    theta = np.zeros(obs.shape + (1,))
    return _average(obs, theta, side, side, params, threads)


def danlm(obs, params, threads=None):
    """Discrete-angle ANLM: the patch distance is the minimum over
    ``params.angles``."""
    obs = check_image(obs, "obs")
    if not params.angles:
        raise ValueError("danlm needs a nonempty angle list")
    theta = np.broadcast_to(np.asarray(params.angles), obs.shape + (len(params.angles),))
    return _average(obs, theta, params.delta_s, params.delta_l, params, threads)


def estimate_gradients(pilot):
    """Forward-difference gradients; the last column/row repeat the
    previous difference."""
    f = check_image(pilot, "pilot", min_size=2)
    gh = np.empty_like(f)
    gv = np.empty_like(f)
    gh[:-1, :] = f[1:, :] - f[:-1, :]
    gh[-1, :] = gh[-2, :]
    gv[:, :-1] = f[:, 1:] - f[:, :-1]
    gv[:, -1] = gv[:, -2]
    magnitude = np.sqrt(gh * gh + gv * gv)
    angle = np.where(magnitude > 0, canonical_angle(np.arctan2(gv, gh)), 0.0)
    return GradientField(gh, gv, magnitude, angle)


def edge_angles(grad, rule="edge"):
    """Neighborhood angles from a gradient field.

    ``rule="edge"`` turns the gradient direction by a quarter turn so the
    rectangle runs along the edge; ``rule="gradient"`` keeps the gradient
    direction itself.
    """
    if rule == "edge":
        return canonical_angle(grad.angle + math.pi / 2)
    if rule == "gradient":
        return grad.angle.copy()
    raise ValueError(f"rule must be 'edge' or 'gradient', got {rule!r}")


def pilot_gradients(pilot, sigma=DEFAULT_GRADIENT_SIGMA):
    """Forward-difference gradients of a Gaussian-blurred pilot image."""
    pilot = check_image(pilot, "pilot", min_size=2)
    sigma = check_nonnegative(sigma, "gradient_sigma")
    if sigma > 0:
        pilot = ndimage.gaussian_filter(pilot, sigma, mode="nearest")
    return estimate_gradients(pilot)


def ganlm(obs, params, lam, pilot="nlm", clean=None, angle_rule="edge",
          gradient_sigma=DEFAULT_GRADIENT_SIGMA, threads=None):
    """Gradient-based ANLM.

    Gradients come from ``pilot``: ``"noisy"`` (the observation itself),
    ``"nlm"`` (an isotropic NLM pre-pass) or ``"oracle"`` (the ``clean``
    image). The pilot is blurred with a Gaussian of ``gradient_sigma``
    pixels before differencing (0 disables this); forward differences of a
    sharp staircase edge only resolve multiples of 45 degrees. Pixels with
    gradient magnitude ``>= lam`` use the anisotropic rectangle along the
    estimated edge; the rest use the square NLM patch.
    """
    obs = check_image(obs, "obs")
    if not lam >= 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if pilot == "noisy":
        source = obs
    elif pilot == "nlm":
        source = nlm(obs, params, threads)
    elif pilot == "oracle":
        if clean is None:
            raise ValueError("pilot='oracle' needs the clean image")
        source = check_image(clean, "clean")
        check_same_shape(obs, source, ("obs", "clean"))
    else:
        raise ValueError(f"pilot must be 'noisy', 'nlm' or 'oracle', got {pilot!r}")
    grad = pilot_gradients(source, gradient_sigma)
    aniso = grad.magnitude >= lam
    n = image_side(obs.shape)

    side = params.nlm_side
    sq_table, _ = rasterize_many([0.0], side, side, n)
    theta = edge_angles(grad, angle_rule)
    an_table, an_index = rasterize_many(theta[aniso], params.delta_s, params.delta_l, n)

    base = sq_table.n_sets
    shift = len(sq_table.offsets)
    table = type(sq_table)(
        offsets=np.concatenate([sq_table.offsets, an_table.offsets]),
        starts=np.concatenate([sq_table.starts, an_table.starts + shift]),
        stops=np.concatenate([sq_table.stops, an_table.stops + shift]),
        reach=np.concatenate([sq_table.reach, an_table.reach]),
        has_center=np.concatenate([sq_table.has_center, an_table.has_center]),
    )
    pixel_sets = np.zeros(obs.shape + (1,), np.int64)
    pixel_sets[aniso, 0] = an_index + base
    return _kernels.run(obs, table, pixel_sets, params.search_radius, params.threshold,
                        params.center_inclusion, threads)


def mean_filter(obs, k):
    """Average over the ``k x k`` window clipped to the image."""
    obs = check_image(obs, "obs")
    if isinstance(k, bool) or int(k) != k or k < 1 or k % 2 == 0:
        raise ValueError(f"k must be a positive odd integer, got {k!r}")
    k = int(k)
    if k == 1:
        return obs.copy()
    kernel = np.ones((k, k))
    # shift by one pixel value so constant images come back exactly
    base = obs.flat[0]
    sums = ndimage.correlate(obs - base, kernel, mode="constant", cval=0.0)
    counts = ndimage.correlate(np.ones_like(obs), kernel, mode="constant", cval=0.0)
    return base + sums / counts
