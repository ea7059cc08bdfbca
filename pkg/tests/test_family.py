from fractions import Fraction

import numpy as np
import pytest

from curvindex.catalog import catalog_get
from curvindex.checks import random_params
from curvindex.family import (
    FamilyError,
    QCParams,
    classify_flatness,
    combination_residual,
    concircular,
    conformal,
    flatness_scan,
    quasi_conformal,
    symmetry_scan,
)
from curvindex.geometry import bundles, curvature_bundle
from curvindex.sampling import SamplingConfig, sample_points

FEW = SamplingConfig(16)


def _b(spec, p=None):
    return curvature_bundle(spec, spec.center if p is None else p)


def test_params_validation():
    with pytest.raises(FamilyError):
        QCParams(0, 0)
    assert QCParams.conformal(4) == QCParams(Fraction(1), Fraction(-1, 2))
    assert QCParams(Fraction(1), Fraction(-1, 2)).regime_value(4) == 0


def test_flat_family_vanishes():
    b = _b(catalog_get("euclidean", {"n": 4}))
    for t in (conformal(b), concircular(b), quasi_conformal(b, QCParams(2.0, -0.3))):
        assert t.max_abs() == 0.0
    assert combination_residual(b, QCParams(1, 1)) == 0.0


def test_unit_sphere_conformally_and_concircularly_flat(inst):
    b = _b(inst("sphere3"), [1.0, 1.3, 2.0])
    assert conformal(b).max_abs() < 1e-9
    assert concircular(b).max_abs() < 1e-9


def test_robertson_walker_conformally_flat_but_curved(inst):
    spec = inst("rw_t2")
    for b in bundles(spec, sample_points(spec, FEW)):
        assert conformal(b).max_abs() < 1e-8
        assert b.R.max_abs() > 0


def test_einstein_product_not_constant_curvature(inst):
    b = _b(inst("einstein_product"))
    assert concircular(b).max_abs() > 0.1 * b.R.max_abs()


@pytest.mark.parametrize("key", ["sphere3", "rw_t2", "einstein_product", "sphere3_semi"])
def test_specializations(inst, key):
    spec = inst(key)
    b = _b(spec)
    n = spec.n
    np.testing.assert_allclose(quasi_conformal(b, QCParams.conformal(n)).components, conformal(b).components,
                               atol=1e-12)
    np.testing.assert_allclose(quasi_conformal(b, QCParams(1, 0)).components, concircular(b).components,
                               atol=1e-12)
    assert combination_residual(b, QCParams.conformal(n)) < 1e-12


def test_combination_identity_random_params(any_spec):
    pts = sample_points(any_spec, SamplingConfig(10))
    for b in bundles(any_spec, pts):
        for p in random_params(10, seed=3):
            assert combination_residual(b, p) < 1e-10


def test_flatness_scan_examples(inst):
    rep = flatness_scan(inst("euclidean4"), QCParams(3.0, 0.7), FEW)
    assert (rep.max_conformal, rep.max_concircular, rep.max_quasi_conformal, rep.max_einstein) == (0, 0, 0, 0)
    rep = flatness_scan(inst("sphere3"), QCParams(1, 1), FEW)
    assert max(rep.max_quasi_conformal, rep.max_concircular, rep.max_einstein) < 1e-8
    rep = flatness_scan(inst("einstein_product"), QCParams(0, 1), FEW)
    assert rep.max_quasi_conformal < 1e-8 and rep.max_conformal > 0


@pytest.mark.parametrize("key,a,b,branch", [
    ("rw_t2", Fraction(1), Fraction(-1, 2), "(i)"),
    ("sphere3", Fraction(1), Fraction(1), "(ii)"),
    ("einstein_product", Fraction(0), Fraction(1), "(iii)"),
    ("rw_t2", Fraction(1), Fraction(1), "not-flat"),
])
def test_classification_branches(inst, key, a, b, branch):
    spec = inst(key)
    p = QCParams(a, b)
    cls = classify_flatness(flatness_scan(spec, p, FEW), p, spec.n)
    assert cls.branch == branch
    assert cls.consistent


def test_classification_rejects_surfaces(inst):
    spec = inst("sphere2")
    p = QCParams(1, 1)
    with pytest.raises(FamilyError):
        classify_flatness(flatness_scan(spec, p, FEW), p, 2)


def test_symmetry_scan_examples(inst):
    rep = symmetry_scan(inst("euclidean3"), QCParams(1, 1), FEW)
    assert rep.max_nabla_quasi_conformal == rep.max_nabla_concircular == rep.max_nabla_ricci == 0
    for p in random_params(3, seed=1):
        rep = symmetry_scan(inst("sphere3"), p, FEW)
        assert rep.max_nabla_concircular < 1e-8 and rep.max_nabla_quasi_conformal < 1e-8
    rep = symmetry_scan(inst("rw_t2"), QCParams(1, 1), FEW)
    assert rep.max_nabla_conformal < 1e-8
    assert not rep.concircularly_symmetric
    assert rep.max_nabla_concircular > rep.tol * rep.scale
