import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carnotgame import algebra as alg
from carnotgame.data import capped_quadratic, constant, smooth_bump
from carnotgame.game import (
    ContractViolation,
    Control,
    GameConfig,
    adversary_gap,
    adversary_response,
    dpp_step,
    move_lattice,
    running_cost,
    solve,
)
from carnotgame.grid import Box, ValueLayer, build_layer
from carnotgame.operators import get_operator
from carnotgame.oracles import bruteforce_dpp_step


@pytest.mark.parametrize("kw", [dict(epsilon=0.0, T=1), dict(epsilon=1.0, T=1), dict(epsilon=0.1, T=-1), dict(epsilon=0.1, T=1, strategy="x")])
def test_config_rejects_bad_values(kw):
    with pytest.raises(ContractViolation):
        GameConfig(**kw)


def test_time_partition_counts_exact_multiples():
    assert GameConfig(epsilon=0.1, T=0.25).m == 25
    assert GameConfig(epsilon=0.2, T=0.12).m == 3


@pytest.mark.parametrize("moves", ["grid", "polar"])
def test_moves_respect_l1_bound(moves):
    cfg = GameConfig(epsilon=0.1, T=0.1, moves=moves)
    mv = move_lattice(cfg, 2, np.array([0.02, 0.02]))
    assert np.all(np.abs(mv).sum(-1) <= cfg.move_bound * (1 + 1e-12))
    assert np.any(np.all(mv == 0, axis=-1))


def test_running_cost_formula():
    cfg = GameConfig(epsilon=0.2, T=0.1)
    op = get_operator("mcf", 2)
    eta, X = np.array([1.0, 0.0]), np.diag([0.5, -0.5])
    nu = np.array([0.3, 0.4])
    r = running_cost(op, cfg.epsilon, 0.0, None, nu, Control(eta, X))
    eps = cfg.epsilon
    F = op.evaluate(eta, X)
    expected = -eps * eta @ nu - 0.5 * eps**2 * nu @ X @ nu - eps**2 * F
    assert r == pytest.approx(expected, abs=1e-14)


def test_running_cost_rejects_oversized_controls():
    op = get_operator("mcf", 2)
    with pytest.raises(ContractViolation):
        running_cost(op, 0.1, 0.0, None, np.zeros(2), Control(np.array([100.0, 0.0]), np.zeros((2, 2))))


@pytest.mark.parametrize("strategy", ["guided", "generic"])
def test_constant_data_preserved(strategy):
    g = alg.euclidean(2)
    box = Box.cube(1.0, 0.1, 2)
    psi, ff = constant(0.7)
    # Player II needs |nu|^2 >= 2 along every axis and diagonal to punish concave X, so eps <= 1/16
    layers = solve(GameConfig(epsilon=0.05, T=0.0075, strategy=strategy), get_operator("mcf", 2), psi, box, g, ff)
    for layer in layers:
        assert np.max(np.abs(layer.values - 0.7)) <= 1e-8


def _bump_layer(h=0.1):
    box = Box.cube(1.5, h, 2)
    psi, ff = smooth_bump(1.0, 1.0)
    return build_layer(box, psi, ff), box


@pytest.mark.parametrize("name", ["mcf", "pil"])
def test_dpp_step_matches_brute_force(name):
    g = alg.euclidean(2)
    layer, box = _bump_layer()
    cfg = GameConfig(epsilon=0.2, T=0.04)
    op = get_operator(name, 2)
    nxt = dpp_step(layer, op, cfg, 0.04, g)
    rng = np.random.default_rng(0)
    nodes = box.nodes()
    for i in rng.choice(len(nodes), 10, replace=False):
        ref = bruteforce_dpp_step(layer, op, cfg, nodes[i], g, 0.04)
        assert nxt.values.ravel()[i] == pytest.approx(ref, abs=1e-12)


def test_uniform_bound_holds():
    g = alg.euclidean(2)
    box = Box.cube(1.5, 0.1, 2)
    psi, ff = capped_quadratic(1.0, 0.5, 0.3, rounding=0.3)
    layers = solve(GameConfig(epsilon=0.2, T=0.2), get_operator("mcf", 2), psi, box, g, ff)
    bound = layers[0].sup_norm
    assert all(L.sup_norm <= bound + 1e-9 for L in layers)


@settings(max_examples=10)
@given(shift=st.floats(0.0, 0.5))
def test_monotone_in_data(shift):
    g = alg.euclidean(2)
    op = get_operator("mcf", 2)
    layer, box = _bump_layer(0.25)
    cfg = GameConfig(epsilon=0.25, T=0.0625, strategy="generic")
    bump = np.exp(-4 * (box.nodes() ** 2).sum(-1)).reshape(box.shape)
    upper = layer.with_values(layer.values + shift * bump, 0.0)
    a = dpp_step(layer, op, cfg, 0.0625, g)
    b = dpp_step(upper, op, cfg, 0.0625, g)
    assert np.all(b.values >= a.values - 1e-12)


@settings(max_examples=20)
@given(c=st.floats(-2, 2))
def test_commutes_with_constants(c):
    g = alg.euclidean(2)
    op = get_operator("mcf", 2)
    layer, box = _bump_layer(0.25)
    cfg = GameConfig(epsilon=0.25, T=0.0625, strategy="generic")
    shifted = ValueLayer(box, layer.values + c, 0.0, layer.far_field + c)
    a = dpp_step(layer, op, cfg, 0.0625, g)
    b = dpp_step(shifted, op, cfg, 0.0625, g)
    assert np.allclose(b.values, a.values + c, atol=1e-10)


def test_thread_count_does_not_change_values(monkeypatch):
    g = alg.euclidean(2)
    op = get_operator("mcf", 2)
    layer, _ = _bump_layer()
    cfg = GameConfig(epsilon=0.2, T=0.04, chunk_elements=1 << 15)
    monkeypatch.setenv("THREADS", "1")
    a = dpp_step(layer, op, cfg, 0.04, g).values
    monkeypatch.setenv("THREADS", "4")
    b = dpp_step(layer, op, cfg, 0.04, g).values
    assert a.tobytes() == b.tobytes()


def test_adversary_response_within_gauge_and_lemma_holds():
    op = get_operator("mcf", 2)
    rng = np.random.default_rng(5)
    eps, K, R0 = 1e-3, 2.0, 5.0
    for _ in range(50):
        eta_hat = rng.uniform(-1, 1, size=2)
        eta = eta_hat + 0.1 * rng.normal(size=2)
        X_hat = rng.uniform(-1, 1, size=(2, 2))
        X_hat = X_hat + X_hat.T
        X = X_hat - 0.1 * np.eye(2)
        nu = adversary_response(eps, eta, eta_hat, X, X_hat, op.lambda1, K, R0)
        assert np.abs(nu).sum() <= eps**-0.25 * (1 + 1e-12)
        assert adversary_gap(op, eps, eta, eta_hat, X, X_hat, nu, K, R0)[0] >= -1e-10
