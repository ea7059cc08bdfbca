import numpy as np
import pytest
from sklearn.base import clone

from curvindex.estimators import CurvatureTransformer, IndexEstimator, QuasiConformalClassifier, check_manifold
from curvindex.manifold import DomainError


def test_index_estimator_params_and_fit():
    est = IndexEstimator(sample_count=4)
    assert est.get_params()["sample_count"] == 4
    est.fit("sphere2_x_line")
    assert est.index_ == 2 and est.decomposable_
    assert est.basis_.shape == (2, 3, 3)
    assert clone(est).get_params() == est.get_params()


def test_index_estimator_predict_and_validation():
    assert IndexEstimator().predict(["euclidean3", "sphere3"]).tolist() == [6, 1]
    with pytest.raises(ValueError):
        IndexEstimator(constraint_order=2).fit("sphere3")
    with pytest.raises(TypeError):
        check_manifold(3.0)


def test_classifier():
    clf = QuasiConformalClassifier(a="1", b="1", n_samples=16)
    assert clf.predict(["sphere3", "rw_t2"]).tolist() == ["(ii)", "not-flat"]
    assert clf.set_params(a=0).get_params()["a"] == 0


def test_transformer():
    tr = CurvatureTransformer(manifold="sphere3", a=1, b=0).fit()
    X = np.array([[1.0, 1.0, 1.0], [2.0, 2.5, 4.0]])
    F = tr.transform(X)
    assert F.shape == (2, 4)
    np.testing.assert_allclose(F[:, 0], 6.0, atol=1e-9)
    assert np.max(F[:, 1:]) < 1e-9
    assert list(tr.get_feature_names_out()) == ["scalar_curvature", "quasi_conformal", "concircular", "einstein"]
    with pytest.raises(ValueError):
        tr.transform(np.ones((2, 2)))
    with pytest.raises(DomainError):
        tr.transform(np.array([[9.0, 9.0, 9.0]]))
    assert tr.fit_transform(X).shape == (2, 4)
