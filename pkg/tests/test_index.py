import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvindex.catalog import catalog_get
from curvindex.geometry import curvature_bundle, metric_at
from curvindex.index import (
    IndexConfig,
    estimate_index,
    first_constraints,
    loop_residuals,
    null_space,
    symmetric_basis,
    unvectorize,
    vectorize,
    zeroth_constraints,
)
from curvindex.manifold import DomainError
from curvindex.transport import default_loops


def _nullity(rows, m, tol=1e-7):
    return null_space(rows, m, tol)[1].shape[1]


def _brute_force_nullity(g, Rvec, tol=1e-9):
    """Solve H(R(X,Y)Z, V) + H(Z, R(X,Y)V) = 0 over symmetric H by direct enumeration."""
    n = g.shape[0]
    pairs = [(a, b) for a in range(n) for b in range(a, n)]
    rows = []
    for x in range(n):
        for y in range(n):
            for z in range(n):
                for v in range(n):
                    row = np.zeros(len(pairs))
                    for col, (a, b) in enumerate(pairs):
                        unit = np.zeros((n, n))
                        unit[a, b] = unit[b, a] = 1.0
                        row[col] = Rvec[x, y, z] @ unit[:, v] + unit[z] @ Rvec[x, y, v]
                    rows.append(row)
    s = np.linalg.svd(np.array(rows), compute_uv=False)
    return len(pairs) - int(np.sum(s > tol * s[0]))


def _constant_curvature_rvec(g, k=1.0):
    # R(X,Y)Z = k (g(Y,Z) X - g(X,Z) Y)
    n = g.shape[0]
    e = np.eye(n)
    return k * (np.einsum("jk,im->ijkm", g, e) - np.einsum("ik,jm->ijkm", g, e))


def test_symmetric_basis_is_orthonormal():
    for n in (2, 3, 4):
        B = symmetric_basis(n)
        gram = np.einsum("aij,bij->ab", B, B)
        np.testing.assert_allclose(gram, np.eye(n * (n + 1) // 2), atol=1e-15)
        H = np.random.default_rng(n).normal(size=(n, n))
        H = H + H.T
        np.testing.assert_allclose(unvectorize(vectorize(H), n), H, atol=1e-14)


def test_flat_zeroth_rows_empty():
    b = curvature_bundle(catalog_get("euclidean", {"n": 3}), [0, 0, 0], with_derivatives=True)
    assert zeroth_constraints(b).shape[0] == 0
    assert first_constraints(b).shape[0] == 0


def test_sphere2_zeroth_nullity_matches_brute_force(inst):
    spec = inst("sphere2")
    p = np.array([1.1, 2.0])
    g = np.diag([1.0, np.sin(p[0]) ** 2])
    assert _brute_force_nullity(g, _constant_curvature_rvec(g)) == 1
    assert _nullity(zeroth_constraints(curvature_bundle(spec, p)), 3) == 1


def test_sphere_times_line_zeroth_nullity_matches_brute_force(inst):
    spec = inst("sphere2_x_line")
    b = curvature_bundle(spec, spec.center)
    g = b.metric.g.components
    R = np.zeros((3, 3, 3, 3))
    R[:2, :2, :2, :2] = _constant_curvature_rvec(g[:2, :2])
    assert _brute_force_nullity(g, R) == 2
    assert _nullity(zeroth_constraints(b), 6) == 2


def test_first_rows_vanish_on_constant_curvature(inst):
    for key in ("sphere3", "hyperbolic3"):
        spec = inst(key)
        b = curvature_bundle(spec, spec.center, with_derivatives=True)
        assert first_constraints(b).shape[0] == 0


def test_first_rows_present_on_robertson_walker(inst):
    spec = inst("rw_t2")
    b = curvature_bundle(spec, spec.center, with_derivatives=True)
    rows = first_constraints(b)
    assert rows.shape[0] > 0 and np.max(np.abs(rows)) > 0


def test_metric_satisfies_every_row(any_spec):
    b = curvature_bundle(any_spec, any_spec.center, with_derivatives=True)
    cg = vectorize(b.metric.g.components)
    for rows in (zeroth_constraints(b), first_constraints(b)):
        if rows.shape[0]:
            assert np.max(np.abs(rows @ cg)) < 1e-12 * max(1.0, b.scale) * np.linalg.norm(cg)


def test_nullity_monotone_in_constraints(any_spec):
    n = any_spec.n
    m = n * (n + 1) // 2
    b = curvature_bundle(any_spec, any_spec.center, with_derivatives=True)
    z = zeroth_constraints(b)
    both = np.vstack([z, first_constraints(b)])
    est = estimate_index(any_spec)
    assert m >= _nullity(z, m) >= _nullity(both, m) >= est.algebraic_nullity >= est.index >= 1


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_flat_loops_accept_any_symmetric_tensor(seed):
    spec = catalog_get("euclidean", {"n": 3})
    H = np.random.default_rng(seed).normal(size=(3, 3))
    H = H + H.T
    res = loop_residuals(spec, default_loops(spec, spec.center), H[None], 4)
    assert np.max(res) < 1e-9


def test_metric_survives_curved_loops(inst):
    spec = inst("rw_t2")
    g = metric_at(spec, spec.center).g.components
    assert np.max(loop_residuals(spec, default_loops(spec, spec.center), g[None], 16)) < 1e-8


@pytest.mark.parametrize("key,expected", [
    ("euclidean4", 10), ("sphere3", 1), ("sphere2_x_line", 2),
])
def test_index_examples(inst, key, expected):
    est = estimate_index(inst(key))
    assert est.index == expected
    assert est.decomposable == (expected > 1)
    np.testing.assert_allclose(est.basis[0], metric_at(inst(key), est.base_point).g.components)
    assert not est.warnings


def test_index_stable_under_step_doubling(any_spec):
    a = estimate_index(any_spec, IndexConfig(steps_per_segment=16)).index
    b = estimate_index(any_spec, IndexConfig(steps_per_segment=32)).index
    assert a == b


def test_products_decomposable_constant_curvature_not(any_spec):
    kind = any_spec.params["label"].split("(")[0]
    est = estimate_index(any_spec)
    if kind in ("product", "einstein_product"):
        assert est.index >= 2
    elif kind in ("sphere", "hyperbolic") and any_spec.connection.kind == "levi_civita":
        assert est.index == 1


def test_two_base_points_agree(inst):
    est = estimate_index(inst("einstein_product"), IndexConfig(sample_count=16))
    assert est.index == 2 and not est.warnings


def test_config_errors(inst):
    spec = inst("sphere3")
    with pytest.raises(ValueError):
        estimate_index(spec, IndexConfig(sample_count=0))
    with pytest.raises(DomainError):
        estimate_index(spec, IndexConfig(base_point=np.array([9.0, 9.0, 9.0])))


def test_report_serializes(inst):
    import json

    js = estimate_index(inst("sphere2")).to_json()
    assert json.loads(json.dumps(js))["index"] == 1
    assert len(js["singular_values"]) >= 1
