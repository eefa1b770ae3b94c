"""scikit-learn style front-end for signed cut decompositions."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_tensor
from .decompose import DecomposeConfig, decompose, expand, gram_system, solve_normal_equations
from .metrics import relative_error
from .search import SearchConfig


class SignedCutApproximator(TransformerMixin, BaseEstimator):
    """Approximate a tensor by a sum of scaled sign outer products.

    ``fit`` learns the sign factors of one tensor. ``transform`` projects any
    tensor of the same shape onto the span of the learned sign terms and
    returns the least-squares coefficients; ``inverse_transform`` expands
    coefficients back to a dense tensor. For the fitted tensor and
    ``method="lstsq"`` the transform returns the fitted coefficients.

    Parameters
    ----------
    width : int, default=64
        Number of sign terms.
    method : {"greedy", "lstsq"}, default="greedy"
    channel_axis : int or None, default=None
        If set, that axis (e.g. RGB) gets one real coefficient per channel
        instead of a sign factor.
    flush_width : int, default=32
    restarts : int, default=1
    max_sweeps : int, default=100
    seed : int, default=0
    min_value_fraction : float, default=0.0

    Attributes
    ----------
    decomposition_ : CutDecomposition
    report_ : CutReport
    shape_ : tuple of int
    """

    def __init__(
        self,
        width=64,
        method="greedy",
        channel_axis=None,
        flush_width=32,
        restarts=1,
        max_sweeps=100,
        seed=0,
        min_value_fraction=0.0,
    ):
        self.width = width
        self.method = method
        self.channel_axis = channel_axis
        self.flush_width = flush_width
        self.restarts = restarts
        self.max_sweeps = max_sweeps
        self.seed = seed
        self.min_value_fraction = min_value_fraction

    def _config(self):
        return DecomposeConfig(
            width=self.width,
            flush_width=self.flush_width,
            method=self.method,
            search=SearchConfig(self.seed, self.restarts, self.max_sweeps),
            min_value_fraction=self.min_value_fraction,
        )

    def fit(self, X, y=None):
        X = check_tensor(X)
        self.decomposition_, self.report_ = decompose(X, self._config(), self.channel_axis)
        self.shape_ = X.shape
        return self

    def _check_input(self, X):
        check_is_fitted(self, "decomposition_")
        X = check_tensor(X)
        if X.shape != self.shape_:
            raise ValueError(f"X has shape {X.shape}, estimator was fitted on {self.shape_}")
        return X

    def transform(self, X):
        """Least-squares coefficients of ``X`` on the fitted sign terms."""
        X = self._check_input(X)
        system = gram_system(X, self.decomposition_)
        return solve_normal_equations(system.gram, system.rhs, system.n_entries)

    def inverse_transform(self, coefficients):
        check_is_fitted(self, "decomposition_")
        d = self.decomposition_.with_coefficients(np.asarray(coefficients, dtype=np.float64))
        return expand(d)

    def reconstruct(self):
        """Dense expansion of the fitted decomposition."""
        check_is_fitted(self, "decomposition_")
        return expand(self.decomposition_)

    def score(self, X, y=None):
        """Negative relative error of the projection of ``X``."""
        X = self._check_input(X)
        return -relative_error(X, self.inverse_transform(self.transform(X)))
