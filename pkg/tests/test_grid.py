import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnotgame import algebra as alg
from carnotgame.grid import Box, ConfigurationError, ValueLayer, build_layer, horizontal_derivatives, sample


def test_box_shape_and_nodes():
    box = Box.cube(1.0, 0.5, 2)
    assert box.shape == (5, 5)
    nodes = box.nodes()
    assert nodes.shape == (25, 2)
    assert np.allclose(nodes[0], [-1, -1]) and np.allclose(nodes[-1], [1, 1])


@pytest.mark.parametrize("kw", [dict(lo=[0.0], hi=[0.0], h=[0.1]), dict(lo=[0.0], hi=[1.0], h=[0.3]), dict(lo=[0.0], hi=[1.0], h=[-0.1])])
def test_box_rejects_bad_geometry(kw):
    with pytest.raises(ConfigurationError):
        Box(**kw)


def test_build_layer_requires_far_field_on_shell():
    box = Box.cube(1.0, 0.25, 2)
    with pytest.raises(ConfigurationError):
        build_layer(box, lambda p: p[:, 0], 0.0)


def test_sample_reproduces_bilinear_functions():
    box = Box.cube(1.0, 0.25, 2)
    layer = ValueLayer(box, (lambda p: 1 + 2 * p[:, 0] - p[:, 1] + 0.5 * p[:, 0] * p[:, 1])(box.nodes()).reshape(box.shape))
    pts = np.random.default_rng(0).uniform(-1, 1, size=(200, 2))
    expected = 1 + 2 * pts[:, 0] - pts[:, 1] + 0.5 * pts[:, 0] * pts[:, 1]
    assert np.allclose(sample(layer, pts), expected, atol=1e-12)


def test_sample_far_field_and_edge_extension():
    box = Box(np.array([-1.0, -1.0]), np.array([1.0, 1.0]), np.array([0.5, 0.5]), ("constant", "edge"))
    values = np.arange(25, dtype=float).reshape(5, 5)
    layer = ValueLayer(box, values, 0.0, far_field=-7.0)
    out, outside = sample(layer, np.array([[5.0, 0.0], [0.0, 5.0]]), return_outside=True)
    assert out[0] == -7.0 and outside[0]
    assert out[1] == values[2, 4] and not outside[1]


@given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10)), arrays(np.float64, (20, 2), elements=st.floats(-2, 2)))
def test_sample_stays_in_range(values, pts):
    box = Box.cube(1.0, 0.4, 2)
    layer = ValueLayer(box, values, 0.0, far_field=0.0)
    out = sample(layer, pts)
    lo, hi = min(values.min(), 0.0), max(values.max(), 0.0)
    assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)


def test_horizontal_derivatives_on_quadratic_euclidean():
    g = alg.euclidean(2)
    box = Box.cube(1.0, 0.05, 2)
    f = lambda p: 0.5 * p[:, 0] ** 2 + 2 * p[:, 0] * p[:, 1] - p[:, 1]
    layer = ValueLayer(box, f(box.nodes()).reshape(box.shape))
    p = np.array([[0.2, -0.1], [0.0, 0.3]])
    eta, X = horizontal_derivatives(layer, p, 0.1, g)
    assert np.allclose(eta, [[0.2 + 2 * -0.1, 2 * 0.2 - 1], [0.0 + 0.6, -1.0]], atol=1e-10)
    assert np.allclose(X, [[1.0, 2.0], [2.0, 0.0]], atol=1e-9)


def test_horizontal_derivatives_heisenberg_match_frame():
    g = alg.heisenberg(1)
    box = Box.cube(1.0, 0.05, 3, ("constant", "constant", "edge"))
    f = lambda p: p[..., 2] + p[..., 0] ** 2
    layer = ValueLayer(box, f(box.nodes()).reshape(box.shape))
    p = np.array([[0.2, -0.3, 0.1]])
    eta, _ = horizontal_derivatives(layer, p, 0.05, g)
    frame = alg.horizontal_frame(g, p[0])
    grad = np.array([2 * p[0, 0], 0.0, 1.0])
    assert np.allclose(eta[0], grad @ frame, atol=1e-2)
