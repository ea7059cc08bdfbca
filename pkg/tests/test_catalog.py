import json

import numpy as np
import pytest

from curvindex.catalog import CatalogError, catalog_get, catalog_list, parse_params
from curvindex.exprjet import to_string
from curvindex.family import concircular, conformal
from curvindex.geometry import curvature_bundle, metric_at, valid_mask
from curvindex.manifold import spec_from_json
from curvindex.sampling import SamplingConfig, sample_points


def _metric_strings(spec):
    return [[to_string(e) for e in row] for row in spec.metric]


def test_euclidean_entry():
    spec = catalog_get("euclidean", {"n": 3})
    assert spec.n == 3 and spec.connection.kind == "levi_civita"
    assert spec.domain == ((-10.0, 10.0),) * 3
    np.testing.assert_array_equal(metric_at(spec, [0, 0, 0]).g.components, np.eye(3))


def test_sphere_entry():
    spec = catalog_get("sphere", {"n": 2, "r": 1})
    assert spec.domain[0] == (0.3, 2.8)
    assert spec.domain[1] == pytest.approx((0.0, 6.28))
    g = metric_at(spec, [1.0, 2.0]).g.components
    np.testing.assert_allclose(g, np.diag([1.0, np.sin(1.0) ** 2]), atol=1e-15)


def test_robertson_walker_entry():
    spec = catalog_get("robertson_walker", {"f": "exp(t)", "k": 0})
    assert spec.domain == ((-1.0, 1.0),) * 4
    p = np.array([0.3, 0.1, -0.2, 0.5])
    np.testing.assert_allclose(metric_at(spec, p).g.components, np.diag([-1.0] + [np.exp(0.6)] * 3), rtol=1e-14)


def test_list_contents():
    entries = {e["name"]: e for e in catalog_list()}
    assert "euclidean" in entries
    assert {"f", "k"} <= set(entries["robertson_walker"]["params"])
    assert [e["name"] for e in catalog_list()] == list(entries)


def test_defaults_round_trip_through_json():
    for e in catalog_list():
        spec = catalog_get(e["name"], {})
        again = spec_from_json(json.loads(json.dumps(spec.to_json())))
        assert again.fingerprint() == spec.fingerprint()
        assert _metric_strings(again) == _metric_strings(spec)


def test_every_instance_valid_on_samples(any_spec):
    pts = sample_points(any_spec, SamplingConfig(200))
    assert valid_mask(any_spec, pts).all()
    signs = {metric_at(any_spec, p).signature for p in pts[::20]}
    assert len(signs) == 1


def test_product_curvature_block_diagonal(inst):
    for key in ("sphere2_x_line", "einstein_product"):
        spec = inst(key)
        nl = spec.params["split"]
        R = curvature_bundle(spec, spec.center).R.components
        mask = np.zeros(R.shape, bool)
        idx = np.indices(R.shape)
        left = idx < nl
        mixed = ~(left.all(axis=0) | (~left).all(axis=0))
        assert np.max(np.abs(R[mixed])) < 1e-9 * np.max(np.abs(R))


def test_einstein_product_is_einstein_only(inst):
    spec = inst("einstein_product")
    for p in sample_points(spec, SamplingConfig(10)):
        b = curvature_bundle(spec, p)
        lam = b.r / spec.n
        assert lam == pytest.approx(1.0, abs=1e-8)
        np.testing.assert_allclose(b.S.components, lam * b.metric.g.components, atol=1e-8)
        assert conformal(b).max_abs() > 0 and concircular(b).max_abs() > 0


def test_param_parsing():
    assert parse_params("n=3,r=2") == {"n": "3", "r": "2"}
    params = parse_params("left=sphere(n=2),right=euclidean(n=1)")
    assert params["left"] == "sphere(n=2)"
    spec = catalog_get("product", params)
    assert spec.n == 3 and spec.params["split"] == 2


@pytest.mark.parametrize("name,params", [
    ("klein_bottle", {}),
    ("sphere", {"r": 0}),
    ("sphere", {"r": -1}),
    ("robertson_walker", {"f": "t^"}),
    ("robertson_walker", {"k": 2}),
    ("euclidean", {"n": 1}),
])
def test_invalid_requests(name, params):
    with pytest.raises(CatalogError):
        catalog_get(name, params)
