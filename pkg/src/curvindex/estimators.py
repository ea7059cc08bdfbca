"""scikit-learn style front end.

The estimators wrap the functional API so that parameters are inspectable
with ``get_params`` and results land in trailing-underscore attributes.
"""
from __future__ import annotations

import os
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .catalog import catalog_instance, instance_keys
from .family import (
    DEFAULT_TOL,
    QCParams,
    classify_flatness,
    concircular_array,
    flatness_scan,
    quasi_conformal_array,
)
from .geometry import geometry_batch
from .index import IndexConfig, NULLITY_TOL, estimate_index
from .manifold import ManifoldSpec, load_spec, spec_from_json
from .sampling import SamplingConfig
from .transport import DEFAULT_STEPS


def check_manifold(obj) -> ManifoldSpec:
    """Accept a spec, a JSON-like dict, a catalog instance key or a spec file path."""
    if isinstance(obj, ManifoldSpec):
        return obj
    if isinstance(obj, dict):
        return spec_from_json(obj)
    if isinstance(obj, (str, os.PathLike)):
        if str(obj) in instance_keys():
            return catalog_instance(str(obj))
        return load_spec(obj)
    raise TypeError(f"cannot interpret {type(obj).__name__} as a manifold spec")


def check_points(X, spec: ManifoldSpec) -> np.ndarray:
    """2-D float array of chart points inside the domain box of ``spec``."""
    X = check_array(X, dtype=float, ensure_2d=True)
    if X.shape[1] != spec.n:
        raise ValueError(f"points have {X.shape[1]} coordinates, manifold has {spec.n}")
    spec.check_point(X.T)
    return X


def check_params(a, b) -> QCParams:
    def conv(v):
        if isinstance(v, (Fraction, int)):
            return Fraction(v)
        if isinstance(v, str):
            return Fraction(v.strip())
        return float(v)

    return QCParams(conv(a), conv(b))


class IndexEstimator(BaseEstimator):
    """Estimate the number of independent parallel symmetric (0,2) tensors."""

    def __init__(self, base_point=None, sample_count=8, constraint_order=1, nullity_tol=NULLITY_TOL,
                 steps_per_segment=DEFAULT_STEPS, seed=0):
        self.base_point = base_point
        self.sample_count = sample_count
        self.constraint_order = constraint_order
        self.nullity_tol = nullity_tol
        self.steps_per_segment = steps_per_segment
        self.seed = seed

    def fit(self, X, y=None):
        spec = check_manifold(X)
        if self.constraint_order not in (0, 1):
            raise ValueError("constraint_order must be 0 or 1")
        cfg = IndexConfig(base_point=self.base_point, sample_count=self.sample_count,
                          constraint_order=self.constraint_order, nullity_tol=self.nullity_tol,
                          steps_per_segment=self.steps_per_segment, seed=self.seed)
        est = estimate_index(spec, cfg)
        self.estimate_ = est
        self.index_ = est.index
        self.algebraic_nullity_ = est.algebraic_nullity
        self.basis_ = est.basis
        self.singular_values_ = est.singular_values
        self.decomposable_ = est.decomposable
        return self

    def predict(self, X) -> np.ndarray:
        """Index of each manifold in ``X`` (fitting a clone per item)."""
        return np.array([IndexEstimator(**self.get_params()).fit(s).index_ for s in X])


class QuasiConformalClassifier(BaseEstimator):
    """Which alternative of the flatness classification a manifold falls into."""

    def __init__(self, a=1, b=1, tol=DEFAULT_TOL, n_samples=64, seed=0):
        self.a = a
        self.b = b
        self.tol = tol
        self.n_samples = n_samples
        self.seed = seed

    def fit(self, X=None, y=None):
        self.params_ = check_params(self.a, self.b)
        return self

    def classify(self, spec):
        check_is_fitted(self, "params_")
        spec = check_manifold(spec)
        rep = flatness_scan(spec, self.params_, SamplingConfig(self.n_samples, self.seed, self.tol))
        return classify_flatness(rep, self.params_, spec.n, self.tol)

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "params_"):
            self.fit()
        return np.array([self.classify(s).branch for s in X], dtype=object)


class CurvatureTransformer(TransformerMixin, BaseEstimator):
    """Pointwise curvature features: ``r, |C*|, |Z|, |E|`` (max-abs norms)."""

    def __init__(self, manifold=None, a=1, b=1):
        self.manifold = manifold
        self.a = a
        self.b = b

    def fit(self, X=None, y=None):
        self.spec_ = check_manifold(self.manifold)
        self.params_ = check_params(self.a, self.b)
        if X is not None:
            check_points(X, self.spec_)
        self.n_features_in_ = self.spec_.n
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "spec_")
        X = check_points(X, self.spec_)
        b = geometry_batch(self.spec_, X)
        red = (-4, -3, -2, -1)
        cs = np.max(np.abs(quasi_conformal_array(b.R, b.S, b.r, b.g, self.params_)), axis=red)
        z = np.max(np.abs(concircular_array(b.R, b.r, b.g)), axis=red)
        e = np.max(np.abs(b.E), axis=(-2, -1))
        return np.column_stack([b.r, cs, z, e])

    def get_feature_names_out(self, input_features=None):
        return np.array(["scalar_curvature", "quasi_conformal", "concircular", "einstein"], dtype=object)
