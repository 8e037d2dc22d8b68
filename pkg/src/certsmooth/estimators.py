"""scikit-learn style wrappers around certification.

The estimators are "fitted" trivially (the base model is fixed); ``fit``
only validates inputs and records ``n_features_in_`` / ``classes_``. Their
value is composition: ``get_params``/``set_params``, cloning, and
``score`` returning the average certified radius so that e.g.
``GridSearchCV`` can tune a fixed sigma against the per-input optimizer.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .certify import ABSTAIN, CertParams, certify
from .models import BaseModel
from .qcrs import QcrsParams, qcrs_optimize, search_region
from .rng import derive_seed


class _SmoothedBase(ClassifierMixin, BaseEstimator):
    def _check_model(self):
        if not isinstance(self.base_model, BaseModel):
            raise TypeError("base_model must be a certsmooth BaseModel")

    def fit(self, X, y=None):
        self._check_model()
        if y is None:
            X = check_array(X)
            self.classes_ = np.arange(self.base_model.num_classes)
        else:
            X, y = check_X_y(X, y)
            self.classes_ = np.unique(np.concatenate([np.arange(self.base_model.num_classes), y]))
        if X.shape[1] != self.base_model.dimension:
            raise ValueError(f"X has {X.shape[1]} features, base model expects "
                             f"{self.base_model.dimension}")
        self.n_features_in_ = X.shape[1]
        return self

    def _validate(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return X

    def _cert_params(self, row: int) -> CertParams:
        seed = derive_seed(self.random_state or 0, "row", row, "certify")
        return CertParams(self.alpha, self.n0, self.n, seed)

    def _sigma_for(self, x, row: int) -> float:
        raise NotImplementedError

    def certify(self, X):
        """Per-row ``(labels, radii, sigmas)``; abstentions carry label -1, radius 0."""
        X = self._validate(X)
        labels = np.empty(len(X), dtype=int)
        radii = np.empty(len(X))
        sigmas = np.empty(len(X))
        for i, x in enumerate(X):
            sigma = self._sigma_for(x, i)
            out = certify(self.base_model, x, sigma, self._cert_params(i))
            labels[i], radii[i], sigmas[i] = out.label, out.radius, sigma
        return labels, radii, sigmas

    def predict(self, X):
        return self.certify(X)[0]

    def score(self, X, y, sample_weight=None):
        """Average certified radius; wrong or abstained rows contribute 0."""
        labels, radii, _ = self.certify(X)
        y = np.asarray(y)
        credited = np.where((labels == y) & (labels != ABSTAIN), radii, 0.0)
        return float(np.average(credited, weights=sample_weight))


class RandomizedSmoothingClassifier(_SmoothedBase):
    """Gaussian-smoothed ``base_model`` certified at one fixed ``sigma``.

    Parameters
    ----------
    base_model : BaseModel
    sigma : float
    alpha : float
        Failure probability of each certificate.
    n0, n : int
        Selection and estimation sample counts.
    random_state : int or None
        Root seed; row ``i`` uses streams derived from ``(random_state, i)``.
    """

    def __init__(self, base_model=None, sigma=0.25, alpha=0.001, n0=100, n=100_000,
                 random_state=None):
        self.base_model = base_model
        self.sigma = sigma
        self.alpha = alpha
        self.n0 = n0
        self.n = n
        self.random_state = random_state

    def _sigma_for(self, x, row):
        return self.sigma


class QCRSClassifier(_SmoothedBase):
    """Smoothed classifier that picks sigma per input before certifying.

    ``sigma_min``/``sigma_max`` default to the published search region for
    ``sigma0``. The chosen sigmas of the last :meth:`certify` call are kept
    in ``sigmas_`` and the optimizer traces in ``traces_``.
    """

    def __init__(self, base_model=None, sigma0=0.25, sigma_min=None, sigma_max=None,
                 epsilon=0.01, tau=0.05, grad_samples=500, alpha=0.001, n0=100, n=100_000,
                 random_state=None):
        self.base_model = base_model
        self.sigma0 = sigma0
        self.sigma_min = sigma_min
        self.sigma_max = sigma_max
        self.epsilon = epsilon
        self.tau = tau
        self.grad_samples = grad_samples
        self.alpha = alpha
        self.n0 = n0
        self.n = n
        self.random_state = random_state

    def _params(self, row: int) -> QcrsParams:
        lo, hi = search_region(self.sigma0)
        return QcrsParams(
            sigma_min=lo if self.sigma_min is None else self.sigma_min,
            sigma_max=hi if self.sigma_max is None else self.sigma_max,
            epsilon=self.epsilon, tau=self.tau, grad_samples=self.grad_samples,
            sigma0=self.sigma0, seed=derive_seed(self.random_state or 0, "row", row, "qcrs"),
        )

    def _sigma_for(self, x, row):
        sigma, trace = qcrs_optimize(self.base_model, x, self._params(row), self.alpha)
        self.traces_.append(trace)
        return sigma

    def certify(self, X):
        self.traces_ = []
        labels, radii, sigmas = super().certify(X)
        self.sigmas_ = sigmas
        return labels, radii, sigmas
