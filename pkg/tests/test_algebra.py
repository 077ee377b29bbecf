import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnotgame import algebra as alg

GROUPS = ["euclidean:2", "heisenberg:1", "heisenberg:2", "engel"]
coord = st.floats(-3, 3, allow_nan=False)


def points(g):
    return arrays(np.float64, g.dim, elements=coord)


@pytest.mark.parametrize("name", GROUPS)
def test_dimensions(name):
    g = alg.group_from_name(name)
    assert g.m1 <= g.dim
    assert alg.horizontal_frame(g, np.zeros(g.dim)).shape == (g.dim, g.m1)


def test_unknown_group():
    with pytest.raises(alg.UnsupportedGroupError):
        alg.group_from_name("sl2")


@pytest.mark.parametrize("name", GROUPS)
@given(data=st.data())
def test_group_axioms(name, data):
    g = alg.group_from_name(name)
    p, q, r = (data.draw(points(g)) for _ in range(3))
    lhs = alg.multiply(g, alg.multiply(g, p, q), r)
    rhs = alg.multiply(g, p, alg.multiply(g, q, r))
    assert np.allclose(lhs, rhs, atol=1e-9)
    e = np.zeros(g.dim)
    assert np.allclose(alg.multiply(g, p, e), p)
    assert np.allclose(alg.multiply(g, p, alg.inverse(g, p)), e, atol=1e-9)


@pytest.mark.parametrize("name", GROUPS)
@given(data=st.data(), lam=st.floats(0.1, 5.0))
def test_dilation_is_automorphism_and_gauge_homogeneous(name, data, lam):
    g = alg.group_from_name(name)
    p, q = data.draw(points(g)), data.draw(points(g))
    lhs = alg.dilate(g, alg.multiply(g, p, q), lam)
    rhs = alg.multiply(g, alg.dilate(g, p, lam), alg.dilate(g, q, lam))
    assert np.allclose(lhs, rhs, atol=1e-8 * max(1.0, lam**3))
    assert alg.gauge(g, alg.dilate(g, p, lam)) == pytest.approx(lam * alg.gauge(g, p), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("name", GROUPS)
@given(data=st.data())
def test_closed_form_matches_bch(name, data):
    g = alg.group_from_name(name)
    p, q = data.draw(points(g)), data.draw(points(g))
    assert np.allclose(alg.multiply(g, p, q), alg.bch_multiply_from_structure(g, p, q), atol=1e-9)


def test_heisenberg_product_known_value():
    g = alg.heisenberg(1)
    out = alg.multiply(g, np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
    assert np.allclose(out[:2], [1.0, 1.0])
    assert abs(out[2]) == pytest.approx(0.5)


def test_gauge_vanishes_only_at_identity():
    g = alg.heisenberg(1)
    assert alg.gauge(g, np.zeros(3)) == 0.0
    assert alg.gauge(g, np.array([0.0, 0.0, 1e-3])) > 0.0
