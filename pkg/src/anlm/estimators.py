"""scikit-learn style wrappers around the denoisers.

Each estimator is stateless apart from the image shape it was fitted on:
``fit`` validates its hyperparameters and records the shape, ``transform``
denoises a single 2-D image or a stack of shape ``(k, n1, n2)``.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import denoise as _dn
from ._validation import check_angle_field

__all__ = ["MeanFilter", "NLMeans", "OrientedANLM", "DiscreteAngleANLM", "GradientANLM"]


def _as_stack(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        return X[None], True
    if X.ndim == 3:
        return X, False
    raise ValueError(f"expected a 2-D image or a 3-D stack, got shape {X.shape}")


class _ImageTransformer(TransformerMixin, BaseEstimator):

    def fit(self, X, y=None):
        stack, _ = _as_stack(X)
        self._check_params()
        self.image_shape_ = stack.shape[1:]
        return self

    def transform(self, X):
        check_is_fitted(self, "image_shape_")
        stack, single = _as_stack(X)
        if stack.shape[1:] != self.image_shape_:
            raise ValueError(f"fitted on shape {self.image_shape_}, got {stack.shape[1:]}")
        out = np.stack([self._denoise(img) for img in stack])
        return out[0] if single else out

    def _check_params(self):
        pass


class _NonlocalBase(_ImageTransformer):

    def _params(self):
        return _dn.DenoiseParams(
            delta_s=self.delta_s, delta_l=self.delta_l, xi=self.xi, tau=self.tau,
            search_radius=self.search_radius, angles=tuple(self.angles),
            center_inclusion=self.center_inclusion,
        )

    def _check_params(self):
        self.params_ = self._params()


class MeanFilter(_ImageTransformer):
    """Clipped ``k x k`` box average.

    Parameters
    ----------
    k : int, default=3
        Odd window side.
    """

    def __init__(self, k=3):
        self.k = k

    def _check_params(self):
        _dn.mean_filter(np.zeros((1, 1)), self.k)

    def _denoise(self, img):
        return _dn.mean_filter(img, self.k)


class NLMeans(_NonlocalBase):
    """Isotropic nonlocal means with square patches of side
    ``sqrt(delta_s * delta_l)``.

    Parameters
    ----------
    delta_s, delta_l : float
        Normalized neighborhood sizes.
    xi : float
        Noise standard deviation.
    tau : float, optional
        Threshold parameter, ``2.7 * xi**2`` when omitted.
    search_radius : int or "full", default=21
    angles : sequence of float
        Only used by :class:`DiscreteAngleANLM`.
    center_inclusion : bool, default=False
    threads : int, optional
        Worker cap; results do not depend on it.
    """

    def __init__(self, delta_s=0.01, delta_l=0.04, xi=0.1, tau=None, search_radius=21,
                 angles=_dn.DEFAULT_ANGLES, center_inclusion=False, threads=None):
        self.delta_s = delta_s
        self.delta_l = delta_l
        self.xi = xi
        self.tau = tau
        self.search_radius = search_radius
        self.angles = angles
        self.center_inclusion = center_inclusion
        self.threads = threads

    def _denoise(self, img):
        return _dn.nlm(img, self.params_, self.threads)


class DiscreteAngleANLM(NLMeans):
    """ANLM taking the minimum patch distance over ``angles``."""

    def _denoise(self, img):
        return _dn.danlm(img, self.params_, self.threads)


class OrientedANLM(NLMeans):
    """ANLM with a given orientation field.

    Parameters
    ----------
    orientation : float or ndarray
        Constant angle or per-pixel field in ``[0, pi)``.
    """

    def __init__(self, orientation=0.0, delta_s=0.01, delta_l=0.04, xi=0.1, tau=None,
                 search_radius=21, angles=_dn.DEFAULT_ANGLES, center_inclusion=False,
                 threads=None):
        super().__init__(delta_s, delta_l, xi, tau, search_radius, angles, center_inclusion,
                         threads)
        self.orientation = orientation

    def fit(self, X, y=None):
        super().fit(X, y)
        theta = self.orientation
        if np.ndim(theta) == 0:
            theta = np.full(self.image_shape_, float(theta))
        self.orientation_ = check_angle_field(theta, self.image_shape_)
        return self

    def _denoise(self, img):
        return _dn.denoise_oriented(img, self.orientation_, self.params_, self.threads)


class GradientANLM(NLMeans):
    """ANLM oriented along edges estimated from a pilot image.

    Parameters
    ----------
    lam : float, default=0.05
        Gradient magnitude at and above which the anisotropic patch is used;
        ``inf`` reduces to :class:`NLMeans`.
    pilot : {"nlm", "noisy"}, default="nlm"
    gradient_sigma : float, default=2.0
    angle_rule : {"edge", "gradient"}, default="edge"
    """

    def __init__(self, lam=0.05, pilot="nlm", gradient_sigma=_dn.DEFAULT_GRADIENT_SIGMA,
                 angle_rule="edge", delta_s=0.01, delta_l=0.04, xi=0.1, tau=None,
                 search_radius=21, angles=_dn.DEFAULT_ANGLES, center_inclusion=False,
                 threads=None):
        super().__init__(delta_s, delta_l, xi, tau, search_radius, angles, center_inclusion,
                         threads)
        self.lam = lam
        self.pilot = pilot
        self.gradient_sigma = gradient_sigma
        self.angle_rule = angle_rule

    def _check_params(self):
        super()._check_params()
        if self.pilot not in ("nlm", "noisy"):
            raise ValueError(f"pilot must be 'nlm' or 'noisy', got {self.pilot!r}")
        if not self.lam >= 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")

    def _denoise(self, img):
        return _dn.ganlm(img, self.params_, self.lam, pilot=self.pilot,
                         angle_rule=self.angle_rule, gradient_sigma=self.gradient_sigma,
                         threads=self.threads)
