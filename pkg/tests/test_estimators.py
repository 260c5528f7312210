import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from anlm.denoise import DenoiseParams, danlm, denoise_oriented, ganlm, mean_filter, nlm
from anlm.estimators import DiscreteAngleANLM, GradientANLM, MeanFilter, NLMeans, OrientedANLM
from anlm.image import add_gaussian_noise

OBS = add_gaussian_noise(np.zeros((16, 16)) + (np.arange(16) > 7)[None, :], 0.2, 4)
KW = dict(delta_s=1 / 16, delta_l=6 / 16, xi=0.2)
P = DenoiseParams(**KW)


def test_get_params_and_clone():
    est = GradientANLM(lam=0.1, **KW)
    params = est.get_params()
    assert params["lam"] == 0.1 and params["delta_l"] == 6 / 16 and params["pilot"] == "nlm"
    assert clone(est).get_params() == params
    est.set_params(lam=0.2)
    assert est.lam == 0.2


@pytest.mark.parametrize("est, fn", [
    (MeanFilter(k=3), lambda x: mean_filter(x, 3)),
    (NLMeans(**KW), lambda x: nlm(x, P)),
    (DiscreteAngleANLM(**KW), lambda x: danlm(x, P)),
    (OrientedANLM(orientation=math.pi / 2, **KW), lambda x: denoise_oriented(x, np.full(x.shape, math.pi / 2), P)),
    (GradientANLM(lam=0.05, **KW), lambda x: ganlm(x, P, 0.05)),
])
def test_transform_matches_functional(est, fn):
    np.testing.assert_array_equal(est.fit_transform(OBS), fn(OBS))


def test_stack_transform():
    stack = np.stack([OBS, OBS[::-1]])
    out = NLMeans(**KW).fit(stack).transform(stack)
    assert out.shape == stack.shape
    np.testing.assert_array_equal(out[1], nlm(OBS[::-1], P))


def test_not_fitted_and_shape_checks():
    with pytest.raises(NotFittedError):
        NLMeans(**KW).transform(OBS)
    est = NLMeans(**KW).fit(OBS)
    with pytest.raises(ValueError):
        est.transform(np.zeros((8, 8)))
    with pytest.raises(ValueError):
        est.transform(np.zeros(4))


@pytest.mark.parametrize("est", [
    MeanFilter(k=2),
    NLMeans(delta_s=0.5, delta_l=0.1),
    NLMeans(xi=-1.0),
    GradientANLM(pilot="oracle"),
    GradientANLM(lam=-1.0),
    OrientedANLM(orientation=np.zeros((3, 3))),
])
def test_fit_validates(est):
    with pytest.raises(ValueError):
        est.fit(OBS)


def test_gradient_lambda_inf_is_nlm():
    a = GradientANLM(lam=math.inf, **KW).fit_transform(OBS)
    np.testing.assert_array_equal(a, NLMeans(**KW).fit_transform(OBS))


def test_pipeline():
    pipe = make_pipeline(MeanFilter(k=1), NLMeans(**KW))
    np.testing.assert_array_equal(pipe.fit_transform(OBS), nlm(OBS, P))
