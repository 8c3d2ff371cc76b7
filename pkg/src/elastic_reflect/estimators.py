"""scikit-learn compatible wrappers.

The transforms and samplers are exposed as estimators with flat scalar
hyper-parameters, so they support ``get_params``/``set_params``/``clone``
and drop into pipelines and parameter grids.  ``fit`` only validates the
configuration; nothing is learned from data.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_columns, check_optional_positive
from .errors import ValidationError
from .laplace import ROUTES, LaplaceQuery, evaluate
from .model import BoundarySpec, DiffusionModel, validate_model
from .montecarlo import estimate_lt
from .phi_solver import get_solver, hitting_lt
from .simulator import METHODS, sample_inverse_local_times


class _DiffusionParamsMixin:
    """Builds the validated model and boundary from flat parameters."""

    def _build_model(self):
        if self.drift == "constant":
            raw = DiffusionModel.brownian(sigma=self.sigma, mu=self.mu,
                                          domain=(self.domain_lo, self.domain_hi))
        elif self.drift == "affine":
            raw = DiffusionModel.ornstein_uhlenbeck(self.beta, sigma=self.sigma, alpha=self.alpha,
                                                    domain=(self.domain_lo, self.domain_hi))
        else:
            raise ValidationError(f"unknown drift family {self.drift!r}")
        return validate_model(raw)

    def _build_boundary(self):
        if self.boundary == "constant":
            return BoundarySpec.constant(self.c0)
        if self.boundary == "linear":
            return BoundarySpec.linear(self.c0, self.c1)
        if self.boundary == "sqrt":
            return BoundarySpec.sqrt(self.c0, self.c1)
        if self.boundary == "power":
            return BoundarySpec.power(self.c0, self.c1, self.p)
        raise ValidationError(f"unknown boundary family {self.boundary!r}")


class LogDerivativeTransformer(_DiffusionParamsMixin, TransformerMixin, BaseEstimator):
    """Map states ``x`` to ``u_lam(x) = Phi'(x)/Phi(x)``."""

    def __init__(self, lam=1.0, drift="constant", mu=0.0, alpha=0.0, beta=0.0, sigma=1.0,
                 domain_lo=-50.0, domain_hi=50.0):
        self.lam = lam
        self.drift = drift
        self.mu = mu
        self.alpha = alpha
        self.beta = beta
        self.sigma = sigma
        self.domain_lo = domain_lo
        self.domain_hi = domain_hi

    def fit(self, X=None, y=None):
        check_optional_positive(self.lam, "lam")
        self.model_ = self._build_model()
        self.solver_ = get_solver(self.model_, self.lam)
        return self

    def transform(self, X):
        check_is_fitted(self, "solver_")
        X = check_columns(X, ["x"])
        return np.atleast_1d(self.solver_(X[:, 0]))

    def get_feature_names_out(self, input_features=None):
        return np.array(["log_derivative"], dtype=object)


class HittingTimeLaplace(_DiffusionParamsMixin, TransformerMixin, BaseEstimator):
    """Rows ``(lam, x, z)`` with ``x <= z`` to ``E_x[exp(-lam T_z)]``."""

    def __init__(self, drift="constant", mu=0.0, alpha=0.0, beta=0.0, sigma=1.0,
                 domain_lo=-50.0, domain_hi=50.0):
        self.drift = drift
        self.mu = mu
        self.alpha = alpha
        self.beta = beta
        self.sigma = sigma
        self.domain_lo = domain_lo
        self.domain_hi = domain_hi

    def fit(self, X=None, y=None):
        self.model_ = self._build_model()
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_columns(X, ["lam", "x", "z"], positive=("lam",))
        return np.array([hitting_lt(self.model_, lam, x, z) for lam, x, z in X])


class InverseLocalTimeLaplace(_DiffusionParamsMixin, TransformerMixin, BaseEstimator):
    """Rows ``(lam, ell)`` to the Laplace transform of the inverse local time.

    ``eps=None`` gives the limiting transform, otherwise the eps-scheme one.
    """

    def __init__(self, eps=None, route="integral", drift="constant", mu=0.0, alpha=0.0,
                 beta=0.0, sigma=1.0, boundary="constant", c0=0.0, c1=0.0, p=1.0,
                 domain_lo=-50.0, domain_hi=50.0):
        self.eps = eps
        self.route = route
        self.drift = drift
        self.mu = mu
        self.alpha = alpha
        self.beta = beta
        self.sigma = sigma
        self.boundary = boundary
        self.c0 = c0
        self.c1 = c1
        self.p = p
        self.domain_lo = domain_lo
        self.domain_hi = domain_hi

    def fit(self, X=None, y=None):
        check_optional_positive(self.eps, "eps")
        if self.route not in ROUTES:
            raise ValidationError(f"unknown route {self.route!r}")
        self.model_ = self._build_model()
        self.boundary_ = self._build_boundary()
        return self

    def transform(self, X):
        check_is_fitted(self, "boundary_")
        X = check_columns(X, ["lam", "ell"], positive=("lam",), nonnegative=("ell",))
        out = np.empty(len(X))
        for i, (lam, ell) in enumerate(X):
            q = LaplaceQuery(self.model_, self.boundary_, lam, ell, self.eps)
            out[i] = evaluate(q, self.route).value
        return out

    def get_feature_names_out(self, input_features=None):
        return np.array(["laplace_transform"], dtype=object)


class InverseLocalTimeSampler(_DiffusionParamsMixin, BaseEstimator):
    """Monte Carlo sampler of ``tau^eps_ell`` and of its Laplace transform."""

    def __init__(self, eps=0.1, method="excursion_sum", seed=0, h=None, T=100.0, drift="constant",
                 mu=0.0, alpha=0.0, beta=0.0, sigma=1.0, boundary="constant", c0=0.0, c1=0.0,
                 p=1.0, domain_lo=-50.0, domain_hi=50.0):
        self.eps = eps
        self.method = method
        self.seed = seed
        self.h = h
        self.T = T
        self.drift = drift
        self.mu = mu
        self.alpha = alpha
        self.beta = beta
        self.sigma = sigma
        self.boundary = boundary
        self.c0 = c0
        self.c1 = c1
        self.p = p
        self.domain_lo = domain_lo
        self.domain_hi = domain_hi

    def fit(self, X=None, y=None):
        if self.eps is None:
            raise ValidationError("eps is required for sampling")
        check_optional_positive(self.eps, "eps")
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        self.model_ = self._build_model()
        self.boundary_ = self._build_boundary()
        return self

    def sample(self, ell, n_samples, start_index=0):
        check_is_fitted(self, "boundary_")
        idx = range(start_index, start_index + n_samples)
        return sample_inverse_local_times(self.model_, self.boundary_, self.eps, ell, self.seed,
                                          idx, self.method, h=self.h, T=self.T)

    def estimate_transform(self, lam, ell, n_samples):
        """Monte Carlo ``(mean, standard error)`` of ``E exp(-lam tau^eps_ell)``."""
        return estimate_lt(self.sample(ell, n_samples), lam)
