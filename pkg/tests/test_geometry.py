import json

import numpy as np
import pytest

from curvindex.catalog import catalog_get
from curvindex.geometry import (
    ConnectionError_,
    connection_at,
    curvature_bundle,
    exterior_derivative_residual,
    metric_at,
    ricci_symmetry_residual,
    semi_symmetric_ricci_residual,
    symmetry_residuals,
)
from curvindex.manifold import DomainError, SpecError, load_spec, spec_from_json
from curvindex.tensors import DegenerateMetricError, metric_trace

NONCLOSED_U = "x1;-x0;0"


def _flat(n=3, **conn):
    return catalog_get("euclidean", {"n": n, **conn})


def test_euclidean_metric():
    m = metric_at(_flat(), [0.1, 0.2, 0.3])
    np.testing.assert_array_equal(m.g.components, np.eye(3))
    assert m.det == 1.0 and m.signs == (1, 1, 1)


def test_sphere_metric_at_equator():
    spec = catalog_get("sphere", {"n": 2, "r": 1})
    assert metric_at(spec, [np.pi / 2, 1.0]).det == pytest.approx(1.0, abs=1e-15)


def test_degenerate_metric_raises():
    spec = spec_from_json({"dimension": 2, "coordinates": ["x", "y"], "metric": [["1"], ["0", "0"]],
                           "domain": {"x": [0, 1], "y": [0, 1]}})
    with pytest.raises(DegenerateMetricError):
        metric_at(spec, [0.5, 0.5])


def test_out_of_domain_point():
    with pytest.raises(DomainError):
        metric_at(_flat(), [11.0, 0.0, 0.0])


def test_flat_connection_vanishes():
    c = connection_at(_flat(), [1.0, -2.0, 0.5])
    assert c.gamma.max_abs() == 0.0 and c.torsion.max_abs() == 0.0


def test_constant_generator_is_levi_civita():
    sphere = catalog_get("sphere", {"n": 3, "r": 1})
    semi = catalog_get("sphere", {"n": 3, "r": 1, "phi": "2"})
    p = [1.0, 1.2, 2.0]
    np.testing.assert_array_equal(connection_at(semi, p).gamma.components, connection_at(sphere, p).gamma.components)


@pytest.mark.parametrize("base,conn", [
    ("euclidean", {"u": NONCLOSED_U}),
    ("euclidean", {"phi": "x0*x1+x2^2"}),
    ("sphere", {"phi": "x0"}),
])
def test_semi_symmetric_torsion_matches_closed_form(base, conn):
    spec = catalog_get(base, {"n": 3, **conn})
    p = np.array([1.1, 0.4, 0.7])
    c = connection_at(spec, p)
    gam = c.gamma.components
    # oracle: antisymmetrize the connection coefficients directly
    antisym = gam - gam.transpose(0, 2, 1)
    if "u" in conn:
        u = np.array([p[1], -p[0], 0.0])
    elif base == "euclidean":
        u = np.array([p[1], p[0], 2 * p[2]])
    else:
        u = np.array([1.0, 0.0, 0.0])
    n = 3
    closed = np.einsum("mi,j->mij", np.eye(n), u) - np.einsum("mj,i->mij", np.eye(n), u)
    np.testing.assert_allclose(c.torsion.components, closed, atol=1e-10)
    np.testing.assert_allclose(antisym, closed, atol=1e-10)


def _torsion_spec():
    z = "0"
    tors = [[[z] * 3 for _ in range(3)] for _ in range(3)]
    tors[0][1][2], tors[0][2][1] = "x0", "-x0"
    tors[2][0][1], tors[2][1][0] = "sin(x1)", "-sin(x1)"
    return spec_from_json({"dimension": 3, "coordinates": ["x0", "x1", "x2"],
                           "metric": [["1+x2^2"], ["0", "2"], ["0.1", "0", "1"]],
                           "domain": {"x0": [-1, 1], "x1": [-1, 1], "x2": [-1, 1]},
                           "connection": {"type": "general_torsion", "torsion": tors}})


def test_general_torsion_is_recovered_and_metric():
    spec = _torsion_spec()
    p = np.array([0.3, -0.4, 0.6])
    b = curvature_bundle(spec, p)
    t = b.connection.torsion.components
    assert t[0, 1, 2] == pytest.approx(0.3, abs=1e-12)
    assert t[2, 0, 1] == pytest.approx(np.sin(-0.4), abs=1e-12)
    assert b.nabla_g.max_abs() < 1e-12
    assert max(symmetry_residuals(b)) < 1e-9


def test_asymmetric_torsion_rejected():
    obj = json.loads(json.dumps(_torsion_spec().to_json()))
    obj["connection"]["torsion"][0][2][1] = "x0"
    with pytest.raises(ConnectionError_):
        curvature_bundle(spec_from_json(obj), [0.3, 0.2, 0.1])


def test_flat_bundle_is_zero():
    b = curvature_bundle(_flat(4), [0.1, 0.2, 0.3, 0.4], with_derivatives=True)
    for t in (b.R, b.S, b.E, b.nabla_R, b.nabla_S):
        assert t.max_abs() == 0.0
    assert b.r == 0.0
    assert symmetry_residuals(b) == (0.0, 0.0)


def test_unit_sphere3_constant_curvature():
    spec = catalog_get("sphere", {"n": 3, "r": 1})
    b = curvature_bundle(spec, [1.0, 1.3, 2.0])
    # closed form for unit S^n: r = n(n-1), Ric = (n-1) g
    assert b.r == pytest.approx(6.0, abs=1e-9)
    np.testing.assert_allclose(b.S.components, 2 * b.metric.g.components, atol=1e-9)
    assert metric_trace(b.S, b.metric) == pytest.approx(6.0, abs=1e-9)
    assert b.E.max_abs() < 1e-9
    assert max(symmetry_residuals(b)) < 1e-10


def test_sphere_radius_scaling():
    b = curvature_bundle(catalog_get("sphere", {"n": 3, "r": 2}), [1.0, 1.3, 2.0])
    assert b.r == pytest.approx(6.0 / 4, abs=1e-9)


def test_einstein_trace_vanishes(any_spec):
    b = curvature_bundle(any_spec, any_spec.center)
    assert abs(metric_trace(b.E, b.metric)) < 1e-10 * max(1.0, abs(b.r))


def test_closed_semi_symmetric_symmetries():
    spec = catalog_get("sphere", {"n": 3, "r": 1, "phi": "x0"})
    b = curvature_bundle(spec, [1.0, 1.3, 2.0])
    assert max(symmetry_residuals(b)) < 1e-9
    assert ricci_symmetry_residual(b) < 1e-9


def test_levi_civita_ricci_symmetric(any_spec):
    if any_spec.connection.kind != "levi_civita":
        pytest.skip("not a Levi-Civita instance")
    assert ricci_symmetry_residual(curvature_bundle(any_spec, any_spec.center)) < 1e-10


@pytest.mark.parametrize("base", ["sphere", "euclidean"])
def test_semi_symmetric_ricci_formula(base):
    spec = catalog_get(base, {"n": 3, "phi": "x0"})
    for p in ([1.0, 1.3, 2.0], [0.5, 0.4, 5.0]):
        assert semi_symmetric_ricci_residual(spec, p) < 1e-7


def test_ricci_formula_zero_generator():
    spec = catalog_get("sphere", {"n": 3, "phi": "1"})
    assert semi_symmetric_ricci_residual(spec, [1.0, 1.3, 2.0]) < 1e-14


def test_nonclosed_form_breaks_ricci_symmetry():
    spec = _flat(u=NONCLOSED_U)
    p = [0.3, 0.2, 0.1]
    assert exterior_derivative_residual(spec, p) == pytest.approx(2.0)
    assert ricci_symmetry_residual(curvature_bundle(spec, p)) > 1e-3
    # the formula itself holds for any generator
    assert semi_symmetric_ricci_residual(spec, p) < 1e-7


def test_ricci_formula_requires_semi_symmetric():
    with pytest.raises(ConnectionError_):
        semi_symmetric_ricci_residual(_flat(), [0, 0, 0])


def test_metric_compatibility_everywhere():
    from curvindex.geometry import geometry_batch
    from curvindex.sampling import SamplingConfig, sample_points

    for spec in (_torsion_spec(), _flat(u=NONCLOSED_U), catalog_get("sphere", {"n": 3, "phi": "x0*x2"})):
        pts = sample_points(spec, SamplingConfig(200))
        b = geometry_batch(spec, pts)
        assert np.max(np.abs(b.nabla_g)) < 1e-10


def _write(tmp_path, obj):
    p = tmp_path / "m.json"
    p.write_text(json.dumps(obj))
    return p


def test_load_spec_bad_row_named(tmp_path):
    obj = {"dimension": 2, "coordinates": ["x", "y"], "metric": [["1", "0", "0"], ["0", "1", "0"]],
           "domain": {"x": [0, 1], "y": [0, 1]}}
    with pytest.raises(SpecError, match="row 0"):
        load_spec(_write(tmp_path, obj))


def test_load_spec_semi_symmetric_needs_generator(tmp_path):
    obj = {"dimension": 2, "coordinates": ["x", "y"], "metric": [["1"], ["0", "1"]],
           "domain": {"x": [0, 1], "y": [0, 1]}, "connection": {"type": "semi_symmetric"}}
    with pytest.raises(SpecError, match="phi"):
        load_spec(_write(tmp_path, obj))


def test_load_spec_malformed_json(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{")
    with pytest.raises(SpecError):
        load_spec(p)
