import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from signcut import SignedCutApproximator, relative_error


def test_params_round_trip():
    est = SignedCutApproximator(width=5, method="lstsq", seed=3)
    params = est.get_params()
    assert params["width"] == 5 and params["method"] == "lstsq" and params["seed"] == 3
    est.set_params(width=7)
    assert est.width == 7
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert not hasattr(twin, "decomposition_")


def test_fit_transform(rng):
    A = rng.standard_normal((20, 30))
    est = SignedCutApproximator(width=12, method="lstsq").fit(A)
    assert est.shape_ == (20, 30)
    assert est.decomposition_.width == 12
    coeffs = est.transform(A)
    np.testing.assert_allclose(coeffs, est.decomposition_.coefficients, rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(est.inverse_transform(coeffs), est.reconstruct(), atol=1e-10)
    assert est.score(A) == pytest.approx(-relative_error(A, est.reconstruct()), rel=1e-8)


def test_transform_improves_greedy(rng):
    A = rng.standard_normal((16, 16))
    est = SignedCutApproximator(width=10).fit(A)
    projected = est.inverse_transform(est.transform(A))
    assert relative_error(A, projected) <= relative_error(A, est.reconstruct()) + 1e-12


def test_fit_transform_mixin(rng):
    A = rng.standard_normal((8, 9))
    est = SignedCutApproximator(width=4)
    assert est.fit_transform(A).shape == (4,)


def test_channel_axis(rng):
    A = rng.standard_normal((8, 8, 3))
    est = SignedCutApproximator(width=5, channel_axis=-1).fit(A)
    assert est.transform(A).shape == (5, 3)
    assert est.reconstruct().shape == A.shape


def test_not_fitted():
    with pytest.raises(NotFittedError):
        SignedCutApproximator().transform(np.ones((2, 2)))


def test_validation(rng):
    est = SignedCutApproximator(width=3).fit(rng.standard_normal((5, 5)))
    with pytest.raises(ValueError):
        est.transform(np.ones((5, 6)))
    with pytest.raises(ValueError):
        SignedCutApproximator(width=2).fit(np.array([[1.0, np.inf]]))
    with pytest.raises(ValueError):
        SignedCutApproximator(width=-1).fit(np.ones((2, 2)))
    with pytest.raises(ValueError):
        SignedCutApproximator(method="svd").fit(np.ones((2, 2)))
