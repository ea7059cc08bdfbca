import numpy as np
import pytest

from curvindex.catalog import catalog_get
from curvindex.checks import triangle_holonomy_angle
from curvindex.geometry import metric_at
from curvindex.manifold import DomainError
from curvindex.tensors import CO, CONTRA, TensorValue
from curvindex.transport import default_loops, parallel_transport, rectangle_loop, segment_steps


def test_flat_transport_is_identity():
    spec = catalog_get("euclidean", {"n": 3})
    path = np.array([[0, 0, 0], [1, 2, 0], [-3, 1, 4], [0.5, 0.5, 0.5]], float)
    v = TensorValue(np.array([1.0, -2.0, 0.5]), (CONTRA,))
    t = TensorValue(np.arange(9.0).reshape(3, 3), (CO, CONTRA))
    np.testing.assert_array_equal(parallel_transport(spec, path, v).components, v.components)
    np.testing.assert_array_equal(parallel_transport(spec, path, t).components, t.components)


def test_metric_is_transported_to_itself(any_spec):
    c = any_spec.center
    w = 0.2 * (any_spec.upper - any_spec.lower)
    path = np.array([c, c + w * np.r_[1, np.zeros(any_spec.n - 1)], c + w])
    g0 = metric_at(any_spec, path[0]).g
    out = parallel_transport(any_spec, path, g0)
    np.testing.assert_allclose(out.components, metric_at(any_spec, path[-1]).g.components, atol=1e-9)


def test_inner_products_preserved(inst):
    spec = inst("rw_t2")
    rng = np.random.default_rng(0)
    path = np.array([spec.center, spec.center + [0.1, 0.3, -0.2, 0.1], spec.center + [0.2, -0.1, 0.3, 0.3]])
    u, v = rng.normal(size=4), rng.normal(size=4)
    ut = parallel_transport(spec, path, TensorValue(u, (CONTRA,))).components
    vt = parallel_transport(spec, path, TensorValue(v, (CONTRA,))).components
    g0, g1 = metric_at(spec, path[0]).g.components, metric_at(spec, path[-1]).g.components
    assert ut @ g1 @ vt == pytest.approx(u @ g0 @ v, abs=1e-9)


def test_octant_triangle_rotates_by_right_angle():
    # holonomy of a geodesic triangle on the unit sphere equals its area, pi/2
    assert abs(triangle_holonomy_angle() - np.pi / 2) < 1e-4


def test_rejects_high_rank_and_leaving_domain():
    spec = catalog_get("sphere", {"n": 2})
    with pytest.raises(ValueError):
        parallel_transport(spec, [[1, 1], [1.1, 1]], TensorValue.covariant(np.zeros((2, 2, 2))))
    with pytest.raises(DomainError):
        parallel_transport(spec, [[1, 1], [3.0, 1]], TensorValue(np.ones(2), (CONTRA,)))


def test_loops_start_and_end_at_base(inst):
    spec = inst("sphere3")
    loops = default_loops(spec, spec.center)
    assert loops.shape[0] == 8
    for loop in loops:
        np.testing.assert_array_equal(loop[0], spec.center)
        np.testing.assert_array_equal(loop[-1], spec.center)
        assert spec.contains(loop.T)
    np.testing.assert_array_equal(rectangle_loop(np.zeros(2), 0, 1, 1.0, -2.0)[2], [1.0, -2.0])


def test_step_count_resolves_long_segments():
    assert segment_steps(0.01, 16) == 16
    assert segment_steps(1.0, 16) == 100
