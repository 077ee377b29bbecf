import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from carnotgame.operators import (
    CustomOperator,
    brute_force_envelopes,
    check_assumptions,
    get_operator,
    register_operator,
    sym,
)

OPS = [("mcf", 2), ("mcf", 3), ("pil", 2), ("pil", 3)]


def sym_mats(m1):
    return arrays(np.float64, (m1, m1), elements=st.floats(-4, 4)).map(sym)


def vecs(m1):
    return arrays(np.float64, m1, elements=st.floats(-3, 3)).filter(lambda v: np.linalg.norm(v) > 1e-3)


def test_mcf_closed_forms():
    op = get_operator("mcf", 2)
    X = np.diag([2.0, 5.0])
    assert op.evaluate(np.array([1.0, 0.0]), X) == pytest.approx(-5.0)
    assert op.lower_envelope_at_zero(X) == pytest.approx(-5.0)
    assert op.upper_envelope_at_zero(X) == pytest.approx(-2.0)


def test_pil_closed_forms():
    op = get_operator("pil", 2)
    X = np.diag([2.0, 5.0])
    assert op.evaluate(np.array([0.0, 3.0]), X) == pytest.approx(-5.0)
    assert op.lower_envelope_at_zero(X) == pytest.approx(-5.0)
    assert op.upper_envelope_at_zero(X) == pytest.approx(-2.0)


def test_unknown_operator():
    with pytest.raises(ValueError):
        get_operator("heat", 2)


@pytest.mark.parametrize("name,m1", OPS)
@given(data=st.data(), lam=st.floats(0.01, 100))
def test_zero_homogeneous_in_eta(name, m1, data, lam):
    op = get_operator(name, m1)
    eta, X = data.draw(vecs(m1)), data.draw(sym_mats(m1))
    assert op.evaluate(lam * eta, X) == pytest.approx(op.evaluate(eta, X), abs=1e-10)


@pytest.mark.parametrize("name,m1", OPS)
@given(data=st.data())
def test_degenerate_ellipticity(name, m1, data):
    op = get_operator(name, m1)
    eta, X = data.draw(vecs(m1)), data.draw(sym_mats(m1))
    v = data.draw(arrays(np.float64, m1, elements=st.floats(-2, 2)))
    Y = X + np.outer(v, v)
    assert op.evaluate(eta, Y) <= op.evaluate(eta, X) + 1e-10
    assert op.upper_envelope_at_zero(Y) <= op.upper_envelope_at_zero(X) + 1e-10


@pytest.mark.parametrize("name,m1", OPS)
@given(data=st.data())
def test_envelopes_bracket_values(name, m1, data):
    op = get_operator(name, m1)
    eta, X = data.draw(vecs(m1)), data.draw(sym_mats(m1))
    f = op.evaluate(eta, X)
    assert op.lower_envelope_at_zero(X) - 1e-10 <= f <= op.upper_envelope_at_zero(X) + 1e-10


@pytest.mark.parametrize("name,m1", OPS)
def test_envelopes_match_brute_force(name, m1):
    op = get_operator(name, m1)
    X = sym(np.random.default_rng(1).normal(size=(5, m1, m1)))
    for x in X:
        lo, hi = brute_force_envelopes(op, x, n_dirs=20000)
        assert lo == pytest.approx(op.lower_envelope_at_zero(x), abs=1e-2)
        assert hi == pytest.approx(op.upper_envelope_at_zero(x), abs=1e-2)


@pytest.mark.parametrize("name,m1", OPS)
def test_assumption_sweep_small(name, m1):
    report = check_assumptions(get_operator(name, m1), n_samples=2000, seed=3)
    assert report["F3_violations"] == 0
    assert report["F4_violations"] == 0


def test_custom_operator_registration():
    register_operator("neg-trace", lambda m1: CustomOperator(
        m1,
        func=lambda eta, X, t, p: -np.trace(X, axis1=-2, axis2=-1),
        lower=lambda X, t, p: -np.trace(X, axis1=-2, axis2=-1),
        upper=lambda X, t, p: -np.trace(X, axis1=-2, axis2=-1),
        lambda0_value=0.0,
        lambda1_value=1.0,
    ))
    op = get_operator("neg-trace", 2)
    assert op.evaluate(np.ones(2), np.eye(2)) == pytest.approx(-2.0)
