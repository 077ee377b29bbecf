"""Deterministic two-player game: running cost, one-step inf-sup operator, time marching.

At a node p and time t Player I picks a control (eta, X), Player II answers
with a horizontal move nu, the state jumps to p . (eps nu, 0) and Player I pays

    R = -eps <eta, nu> - eps^2/2 <X nu, nu> - eps^2 F(eta, X).

The value is the discounted inf over controls of the sup over moves of the
previous layer at the landing point plus R. Both sets are finite here: see
``player1_controls`` and ``move_lattice``.
"""

from __future__ import annotations

import itertools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._kernel import inf_sup
from .algebra import CarnotGroup, dilate, multiply
from .grid import Box, ValueLayer, build_layer, horizontal_derivatives, sample
from .operators import SingularOperator, sym

log = logging.getLogger(__name__)

STRATEGIES = ("guided", "generic")
MOVE_SETS = ("grid", "star", "polar")
_DEGENERATE = 1e-10


class ContractViolation(ValueError):
    pass


@dataclass(frozen=True)
class GameConfig:
    epsilon: float
    T: float
    mu: float = 0.0
    strategy: str = "guided"
    n_dir: int = 8
    n_mag: int = 4
    eta_min: float = 1e-6
    x_grid: tuple = (-1.0, 0.0, 1.0)
    guided_shifts: tuple = (0.5,)
    guided_neighbors: int = 2
    guided_fit: bool = True
    moves: str = "polar"
    delta: float | None = 0.1
    seed: int = 0
    chunk_elements: int = 1 << 21

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ContractViolation("epsilon must lie in (0, 1)")
        if self.mu < 0 or self.T < 0:
            raise ContractViolation("mu and T must be nonnegative")
        if self.strategy not in STRATEGIES:
            raise ContractViolation(f"strategy must be one of {STRATEGIES}")
        if self.moves not in MOVE_SETS:
            raise ContractViolation(f"moves must be one of {MOVE_SETS}")
        if self.n_dir < 1 or self.n_mag < 1:
            raise ContractViolation("n_dir and n_mag must be positive")
        if not 0.0 < self.eta_min <= self.eta_bound:
            raise ContractViolation("eta_min must lie in (0, eps^-1/4]")
        if self.guided_neighbors < 0:
            raise ContractViolation("guided_neighbors must be nonnegative")
        if self.delta is not None and self.delta <= 0:
            raise ContractViolation("delta must be positive")
        object.__setattr__(self, "x_grid", tuple(float(a) for a in self.x_grid))
        object.__setattr__(self, "guided_shifts", tuple(float(a) for a in self.guided_shifts))

    @property
    def m(self) -> int:
        # the tiny guard keeps T = k eps^2 from rounding down to k - 1
        return int(math.floor(self.T / self.epsilon**2 + 1e-9))

    @property
    def eta_bound(self) -> float:
        return self.epsilon**-0.25

    @property
    def x_bound(self) -> float:
        return self.epsilon**-0.5

    @property
    def move_bound(self) -> float:
        return self.epsilon**-0.25

    def layer_index(self, t: float) -> int:
        """k_t: index of the layer representing u(t, .) (cells are ((k-1)eps^2, k eps^2])."""
        if t < 0:
            raise ContractViolation("time must be nonnegative")
        k = int(math.ceil(t / self.epsilon**2 - 1e-9))
        return min(max(k, 0), self.m)


@dataclass(frozen=True)
class Control:
    """Player I's pair; ``eta is None`` is the zero-gradient sentinel."""

    eta: np.ndarray | None
    X: np.ndarray

    @property
    def is_sentinel(self) -> bool:
        return self.eta is None


# -- running cost ----------------------------------------------------------------


def _lin(eta, nu):
    out = 0.0
    for i in range(nu.shape[-1]):
        out = out + eta[..., i] * nu[..., i]
    return out


def _quadform(X, nu):
    out = 0.0
    m = nu.shape[-1]
    for i in range(m):
        for j in range(m):
            out = out + X[..., i, j] * nu[..., i] * nu[..., j]
    return out


def _cost(eps, lin, quad, F):
    return -eps * lin - 0.5 * eps**2 * quad - eps**2 * F


def running_cost(op: SingularOperator, eps: float, t, p, nu, control: Control, check_bounds: bool = True):
    if control.is_sentinel:
        raise ContractViolation("zero-gradient control must be priced with running_cost_envelope")
    eta = np.asarray(control.eta, dtype=float)
    X = np.asarray(control.X, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if not np.any(eta):
        raise ContractViolation("eta must be nonzero")
    if check_bounds:
        _check_control_bounds(eps, eta, X)
        _check_move_bound(eps, nu)
    return _cost(eps, _lin(eta, nu), _quadform(X, nu), op.evaluate(eta, X, t, p))


def running_cost_envelope(op: SingularOperator, eps: float, t, p, nu, X, which: str = "upper"):
    X = np.asarray(X, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if which == "upper":
        F = op.upper_envelope_at_zero(X, t, p)
    elif which == "lower":
        F = op.lower_envelope_at_zero(X, t, p)
    else:
        raise ValueError("which must be 'lower' or 'upper'")
    return _cost(eps, 0.0, _quadform(X, nu), F)


def _check_control_bounds(eps, eta, X):
    if np.linalg.norm(eta) > eps**-0.25 * (1 + 1e-12):
        raise ContractViolation("||eta|| exceeds eps^-1/4")
    if np.max(np.abs(np.linalg.eigvalsh(sym(X)))) > eps**-0.5 * (1 + 1e-12):
        raise ContractViolation("||X|| exceeds eps^-1/2")


def _check_move_bound(eps, nu):
    if np.sum(np.abs(nu)) > eps**-0.25 * (1 + 1e-12):
        raise ContractViolation("|q|_G exceeds eps^-1/4")


# -- discrete control and move sets ---------------------------------------------


def unit_directions(m1: int, n: int, seed: int = 0) -> np.ndarray:
    if m1 == 1:
        return np.array([[1.0], [-1.0]])
    if m1 == 2:
        th = 2.0 * np.pi * np.arange(n) / n
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    v = np.random.default_rng(seed).normal(size=(n, m1))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def move_lattice(cfg: GameConfig, m1: int, h=None) -> np.ndarray:
    """Player II's moves nu, shape (K, m1), always containing nu = 0.

    ``"grid"``: nu = (h/eps) k for integer k, so the horizontal part of every
    landing point is a grid node. ``"star"``: the grid moves whose nonzero
    entries of k share one absolute value (axes and diagonals). ``"polar"``: n_dir directions times n_mag
    magnitudes, normalized in l1.
    """
    bound = cfg.move_bound
    eps = cfg.epsilon
    if cfg.moves in ("grid", "star"):
        if h is None:
            raise ContractViolation("the grid move set needs the horizontal grid spacing")
        step = np.broadcast_to(np.asarray(h, dtype=float), (m1,)) / eps
        # coarsen so that about n_mag lattice steps span the reach along each axis
        step = step * np.maximum(1, np.floor(bound / (cfg.n_mag * step) + 1e-12))
        kmax = [int(math.floor(bound / s + 1e-12)) for s in step]
        out = []
        for k in itertools.product(*[range(-km, km + 1) for km in kmax]):
            nu = np.asarray(k) * step
            if np.sum(np.abs(nu)) > bound * (1 + 1e-12):
                continue
            if cfg.moves == "star" and len({abs(i) for i in k if i}) > 1:
                continue
            out.append(nu)
        return np.array(out)
    dirs = unit_directions(m1, cfg.n_dir, cfg.seed)
    dirs = dirs / np.sum(np.abs(dirs), axis=-1, keepdims=True)
    mags = bound * np.arange(1, cfg.n_mag + 1) / cfg.n_mag
    return np.concatenate([np.zeros((1, m1)), (dirs[:, None, :] * mags[None, :, None]).reshape(-1, m1)])


def _x_dictionary(cfg: GameConfig, m1: int, direction=None):
    eye = np.eye(m1)
    out = []
    for a in cfg.x_grid:
        if direction is None:
            X = a * eye
            if abs(a) <= cfg.x_bound:
                out.append(X)
            continue
        P = np.outer(direction, direction)
        for b in cfg.x_grid:
            X = a * eye + b * P
            if np.max(np.abs(np.linalg.eigvalsh(X))) <= cfg.x_bound * (1 + 1e-12):
                out.append(X)
    return out


def generic_controls(cfg: GameConfig, m1: int) -> list[Control]:
    dirs = unit_directions(m1, cfg.n_dir, cfg.seed)
    if cfg.n_mag == 1:
        mags = np.array([cfg.eta_bound])
    else:
        mags = np.geomspace(cfg.eta_min, cfg.eta_bound, cfg.n_mag)
    controls = []
    for d in dirs:
        for r in mags:
            for X in _x_dictionary(cfg, m1, d):
                controls.append(Control(d * r, X))
    for X in _x_dictionary(cfg, m1):
        controls.append(Control(None, X))
    return controls


def clamp_eta(eta, bound):
    eta = np.asarray(eta, dtype=float)
    n = np.linalg.norm(eta, axis=-1, keepdims=True)
    return np.where(n > bound, eta * (bound / np.where(n > 0, n, 1.0)), eta)


def clamp_X(X, bound):
    """Clip eigenvalues into [-bound, bound]; matrices already inside are returned untouched."""
    X = sym(X)
    # the Frobenius norm dominates the spectral norm, so most inputs skip eigh
    if np.sqrt(np.max(np.sum(X * X, axis=(-2, -1)), initial=0.0)) <= bound:
        return X
    w, V = np.linalg.eigh(X)
    over = np.max(np.abs(w), axis=-1) > bound
    if not np.any(over):
        return X
    clipped = np.einsum("...ij,...j,...kj->...ik", V, np.clip(w, -bound, bound), V)
    return np.where(over[..., None, None], clipped, X)


def _stencil_delta(u_prev: ValueLayer, cfg: GameConfig) -> float:
    return cfg.delta if cfg.delta is not None else float(np.min(u_prev.box.h))


def quadratic_fit_weights(moves, eps: float):
    """Least-squares weights W, shape (P, K), for the model
    u(p.(eps nu, 0)) ~ a + eps <eta, nu> + eps^2/2 <X nu, nu> over the move set.

    Rows are (a, eta_1..eta_m1, X_11, X_12, .., X_m1m1) (upper triangle, row
    major). Returns None when the move set cannot determine the model.
    """
    moves = np.asarray(moves, dtype=float)
    K, m1 = moves.shape
    cols = [np.ones(K)] + [eps * moves[:, i] for i in range(m1)]
    for i in range(m1):
        for j in range(i, m1):
            c = 0.5 if i == j else 1.0
            cols.append(c * eps**2 * moves[:, i] * moves[:, j])
    A = np.stack(cols, axis=1)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        return None
    return np.linalg.pinv(A)


def _apply_fit(W, S, m1):
    coef = 0.0
    for k in range(S.shape[-1]):
        coef = coef + S[:, k, None] * W[None, :, k]
    eta = coef[:, 1 : 1 + m1]
    X = np.zeros((S.shape[0], m1, m1))
    c = 1 + m1
    for i in range(m1):
        for j in range(i, m1):
            X[:, i, j] = coef[:, c]
            X[:, j, i] = coef[:, c]
            c += 1
    return eta, X


def guided_estimates(u_prev: ValueLayer, points, cfg: GameConfig, g: CarnotGroup, S=None, fit_weights=None):
    """Candidate (eta, X) models of u_prev at ``points``, clamped to the control bounds.

    Estimates, in order: centred group-translated differences at p; when
    ``cfg.guided_neighbors`` > 0 the centred estimate at each q = p.exp(s e_j),
    s = +/- guided_neighbors * delta, carried back to p by its own Taylor model
    (eta_p = eta_q - s X_q e_j, X_p = X_q), so that near a kink some stencil lies
    on one smooth side; and, given landing values ``S`` and ``fit_weights``, the
    least-squares quadratic through all landing values, which is insensitive to
    roughness at the grid scale. Shapes (n, J, m1) and (n, J, m1, m1).
    """
    delta = _stencil_delta(u_prev, cfg)
    points = np.asarray(points, dtype=float)
    eta, X, breaches = horizontal_derivatives(u_prev, points, delta, g, return_breaches=True)
    etas, Xs = [eta], [X]
    m1 = g.m1
    if cfg.guided_neighbors:
        for j in range(m1):
            for sign in (1.0, -1.0):
                s = sign * cfg.guided_neighbors * delta
                shift = np.zeros(m1)
                shift[j] = s
                q = multiply(g, points, g.horizontal_point(shift))
                eq, Xq, b = horizontal_derivatives(u_prev, q, delta, g, return_breaches=True)
                breaches += b
                etas.append(eq - s * Xq[..., :, j])
                Xs.append(Xq)
    if fit_weights is not None and S is not None:
        ef, Xf = _apply_fit(fit_weights, S, m1)
        etas.append(ef)
        Xs.append(Xf)
    eta = np.stack(etas, axis=1)
    X = np.stack(Xs, axis=1)
    return clamp_eta(eta, cfg.eta_bound), clamp_X(X, cfg.x_bound), breaches


def _guided_arrays(eta_est, X_est, cfg: GameConfig):
    """Per-node control tensors (n, C, m1), (n, C, m1, m1) and sentinel mask (n, C).

    Order: zero-sentinel with the centred Hessian (X = O unless the centred
    gradient is below eta_min), zero-sentinel with X = O, then
    for every estimate (eta, X) itself followed by X + a I, X - a I, X + a e e^T
    and X + a (I - e e^T) for each shift a, with e = eta/|eta|, and finally the
    same two rank-one shifts taken large enough to saturate the eigenvalue bound.
    A positive rank-one shift costs nothing in F for one of the shipped
    operators (normal for MCF, tangential for PIL); the saturated ones stop
    Player II from exploiting curvature that changes within the move reach. Negative rank-one shifts are left out: they
    raise F, and the l1 move bound leaves Player II too short a diagonal reach
    to punish them unless eps < 1/16.
    """
    n, J, m1 = eta_est.shape
    eye = np.eye(m1)
    big = 2.0 * cfg.x_bound
    zero_eta = np.zeros((n, m1))
    etas = [zero_eta, zero_eta]
    # the centred Hessian rides on the sentinel only where the centred gradient
    # vanishes; elsewhere the envelope price of a concave direction undercuts
    flat_center = np.sqrt(_lin(eta_est[:, 0], eta_est[:, 0])) <= cfg.eta_min
    Xs = [np.where(flat_center[:, None, None], X_est[:, 0], 0.0), np.zeros((n, m1, m1))]
    sent = [np.ones(n, bool), np.ones(n, bool)]
    for j in range(J):
        e, X = eta_est[:, j], X_est[:, j]
        norm = np.sqrt(_lin(e, e))
        flat = norm == 0.0
        unit = np.where(flat[:, None], eye[0], e / np.where(flat, 1.0, norm)[:, None])
        P = unit[:, :, None] * unit[:, None, :]
        etas.append(e)
        Xs.append(X)
        sent.append(flat)
        for a in cfg.guided_shifts:
            for D in (a * eye, -a * eye, a * P, a * (eye - P)):
                etas.append(e)
                Xs.append(clamp_X(X + D, cfg.x_bound))
                sent.append(flat)
        for D in (big * P, big * (eye - P)):
            etas.append(e)
            Xs.append(clamp_X(X + D, cfg.x_bound))
            sent.append(flat)
    return np.stack(etas, axis=1), np.stack(Xs, axis=1), np.stack(sent, axis=1)


def n_guided_controls(cfg: GameConfig, m1: int, with_fit: bool) -> int:
    J = 1 + (2 * m1 if cfg.guided_neighbors else 0) + (1 if with_fit else 0)
    return 2 + J * (3 + 4 * len(cfg.guided_shifts))


def landing_values(u_prev: ValueLayer, points, moves, cfg: GameConfig, g: CarnotGroup):
    """u_prev at p.(eps nu, 0) for every point and move, shape (n, K), plus the outside mask."""
    steps = dilate(g, g.horizontal_point(moves), cfg.epsilon)
    targets = multiply(g, np.asarray(points, dtype=float)[:, None, :], steps[None, :, :])
    return sample(u_prev, targets, return_outside=True)


def guided_controls_arrays(u_prev: ValueLayer, points, cfg: GameConfig, g: CarnotGroup, moves, S=None):
    if S is None:
        S, _ = landing_values(u_prev, points, moves, cfg, g)
    W = quadratic_fit_weights(moves, cfg.epsilon) if cfg.guided_fit else None
    eta_est, X_est, breaches = guided_estimates(u_prev, points, cfg, g, S, W)
    etas, Xs, sent = _guided_arrays(eta_est, X_est, cfg)
    return etas, Xs, sent, breaches


def player1_controls(u_prev: ValueLayer, p, cfg: GameConfig, op: SingularOperator, g: CarnotGroup) -> list[Control]:
    """Player I's finite control set at node ``p`` under ``cfg.strategy``."""
    m1 = g.m1
    if cfg.strategy == "generic":
        return generic_controls(cfg, m1)
    moves = move_lattice(cfg, m1, u_prev.box.h[:m1])
    etas, Xs, sent, _ = guided_controls_arrays(u_prev, np.asarray(p, dtype=float)[None], cfg, g, moves)
    return [Control(None if s else e, X) for e, X, s in zip(etas[0], Xs[0], sent[0])]


def _controls_to_arrays(controls: list[Control], m1: int):
    etas = np.array([np.zeros(m1) if c.is_sentinel else np.asarray(c.eta, float) for c in controls])
    Xs = np.array([np.asarray(c.X, float) for c in controls])
    sent = np.array([c.is_sentinel for c in controls])
    return etas, Xs, sent


def _operator_values(op, etas, Xs, sent, t, p):
    # eta = 0 is never passed to evaluate; sentinels use the upper envelope
    safe = np.where(sent[..., None], 1.0, etas)
    F = op.evaluate(safe, Xs, t, p)
    return np.where(sent, op.upper_envelope_at_zero(Xs, t, p), F)


# -- one DPP step ----------------------------------------------------------------


def thread_count() -> int:
    raw = os.environ.get("THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ContractViolation(f"THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


@dataclass
class StepDiagnostics:
    bound_excess: float = -math.inf
    clipped_nodes: int = 0
    target_breaches: int = 0
    stencil_breaches: int = 0
    extras: dict = field(default_factory=dict)

    def merge(self, other: "StepDiagnostics"):
        self.bound_excess = max(self.bound_excess, other.bound_excess)
        self.clipped_nodes += other.clipped_nodes
        self.target_breaches += other.target_breaches
        self.stencil_breaches += other.stencil_breaches

    def as_dict(self):
        return {
            "bound_excess": self.bound_excess,
            "clipped_nodes": self.clipped_nodes,
            "target_breaches": self.target_breaches,
            "stencil_breaches": self.stencil_breaches,
        }


def _node_values(u_prev, nodes, op, cfg, g, t, moves, generic):
    """Discounted inf-sup at each node of ``nodes``; returns (values, target breaches, stencil breaches)."""
    eps = cfg.epsilon
    S, outside = landing_values(u_prev, nodes, moves, cfg, g)
    stencil = 0
    if generic is not None:
        etas, Xs, sent = generic
        etas, Xs, sent = etas[None], Xs[None], sent[None]
    else:
        etas, Xs, sent, stencil = guided_controls_arrays(u_prev, nodes, cfg, g, moves, S)
    F = _operator_values(op, etas, Xs, sent, t, nodes[:, None, :])
    n = len(nodes)
    etas = np.broadcast_to(etas, (n,) + etas.shape[1:])
    Xs = np.broadcast_to(Xs, (n,) + Xs.shape[1:])
    F = np.ascontiguousarray(np.broadcast_to(F, (n, F.shape[-1])))
    best = inf_sup(np.ascontiguousarray(S), etas, Xs, F, moves, -eps, 0.5 * eps**2, eps**2, np.empty(n))
    value = best / (1.0 + cfg.mu * eps**2)
    return value, int(outside.sum()), int(stencil)


def dpp_step(
    u_prev: ValueLayer,
    op: SingularOperator,
    cfg: GameConfig,
    t: float,
    g: CarnotGroup,
    bound: float | None = None,
    diagnostics: StepDiagnostics | None = None,
) -> ValueLayer:
    """One application of the discounted inf-sup operator to every grid node.

    ``bound`` is the uniform bound sup|psi|; values are clipped to it after the
    largest pre-clip excess is recorded in ``diagnostics``.
    """
    box = u_prev.box
    if box.dim != g.dim:
        raise ContractViolation("grid and group dimensions differ")
    nodes = box.nodes()
    moves = move_lattice(cfg, g.m1, box.h[: g.m1])
    generic = _controls_to_arrays(generic_controls(cfg, g.m1), g.m1) if cfg.strategy == "generic" else None
    if generic is not None:
        n_controls = len(generic[0])
    else:
        n_controls = n_guided_controls(cfg, g.m1, cfg.guided_fit)
    chunk = max(1, cfg.chunk_elements // (n_controls * len(moves)))
    bounds = [(s, min(s + chunk, len(nodes))) for s in range(0, len(nodes), chunk)]

    def work(span):
        a, b = span
        return _node_values(u_prev, nodes[a:b], op, cfg, g, t, moves, generic)

    workers = min(thread_count(), len(bounds))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(s) for s in bounds]
    values = np.concatenate([v for v, _, _ in parts])
    diag = StepDiagnostics(
        target_breaches=sum(b for _, b, _ in parts),
        stencil_breaches=sum(s for _, _, s in parts),
    )
    if bound is not None:
        diag.bound_excess = float(np.max(np.abs(values)) - bound)
        over = np.abs(values) > bound
        diag.clipped_nodes = int(over.sum())
        values = np.clip(values, -bound, bound)
    if diagnostics is not None:
        diagnostics.merge(diag)
    return u_prev.with_values(values.reshape(box.shape), t)


def solve(
    cfg: GameConfig,
    op: SingularOperator,
    psi,
    box: Box,
    g: CarnotGroup,
    far_field: float,
    diagnostics: StepDiagnostics | None = None,
    callback=None,
) -> list[ValueLayer]:
    """Layers at t = 0, eps^2, ..., m eps^2."""
    layer = build_layer(box, psi, far_field)
    bound = layer.sup_norm
    layers = [layer]
    eps2 = cfg.epsilon**2
    for k in range(1, cfg.m + 1):
        layer = dpp_step(layer, op, cfg, k * eps2, g, bound=bound, diagnostics=diagnostics)
        layers.append(layer)
        if callback is not None:
            callback(k, layer)
        log.debug("step %d/%d done", k, cfg.m)
    return layers


def value_at(layers: list[ValueLayer], cfg: GameConfig, t: float) -> ValueLayer:
    return layers[cfg.layer_index(t)]


# -- reference maximizer ---------------------------------------------------------


def bruteforce_sup(u_prev: ValueLayer, p, c: Control, cfg: GameConfig, op: SingularOperator, g: CarnotGroup, t: float = 0.0, moves=None):
    """Exhaustive sup over the move lattice of the bracket; returns (value, argmax nu)."""
    p = np.asarray(p, dtype=float)
    if moves is None:
        moves = move_lattice(cfg, g.m1, u_prev.box.h[: g.m1])
    eps = cfg.epsilon
    if c.is_sentinel:
        F = op.upper_envelope_at_zero(np.asarray(c.X, float), t, p)
        eta = np.zeros(g.m1)
    else:
        eta = np.asarray(c.eta, float)
        F = op.evaluate(eta, np.asarray(c.X, float), t, p)
    best, arg = -math.inf, None
    for nu in np.asarray(moves, dtype=float):
        target = multiply(g, p, dilate(g, g.horizontal_point(nu), eps))
        val = float(sample(u_prev, target)) + float(_cost(eps, _lin(eta, nu), _quadform(np.asarray(c.X, float), nu), F))
        if val > best:
            best, arg = val, nu
    return best, arg


# -- adversary of the fundamental lemma -----------------------------------------

BRANCHES = ("near_pos", "near_nonpos", "far_aligned_pos", "far_aligned_nonpos", "far_oblique_pos", "far_oblique_nonpos")


def adversary_moves(eps, eta, eta_hat, X, X_hat, lambda1, K):
    """Vectorized adversary: returns (nu, branch index into BRANCHES, part) per draw.

    part is 1 when ||eta_hat|| >= 1/K (target eta_hat) and 2 otherwise (target 0).
    """
    eta = np.atleast_2d(np.asarray(eta, dtype=float))
    eta_hat = np.atleast_2d(np.asarray(eta_hat, dtype=float))
    X = np.asarray(X, dtype=float)
    X_hat = np.asarray(X_hat, dtype=float)
    if X.ndim == 2:
        X = X[None]
    if X_hat.ndim == 2:
        X_hat = X_hat[None]
    m1 = eta.shape[-1]
    part1 = np.linalg.norm(eta_hat, axis=-1) >= 1.0 / K
    d = np.where(part1[:, None], eta_hat, 0.0) - eta
    e1 = np.zeros(m1)
    e1[0] = 1.0
    d = np.where((np.linalg.norm(d, axis=-1) == 0.0)[:, None], _DEGENERATE * e1, d)
    D = sym(X_hat - X)
    flat = np.all(D == 0.0, axis=(-2, -1))
    D = np.where(flat[:, None, None], _DEGENERATE * np.eye(m1), D)
    w, V = np.linalg.eigh(D)
    xi0 = V[..., -1]
    E = w[..., -1]
    proj = np.einsum("bi,bij->bj", d, V)  # <d, xi_j>, xi0 is the last column
    p0 = proj[:, -1]
    near = np.linalg.norm(d, axis=-1) <= eps**0.25
    aligned = np.abs(p0) >= eps**0.5 / lambda1
    pos = E > 0
    s0 = np.select(
        [near & pos, near, aligned & pos, aligned, pos],
        [lambda1, 0.0, lambda1, eps**0.25 * lambda1, lambda1],
        default=0.0,
    )
    s0 = s0 * np.where(p0 >= 0, 1.0, -1.0)
    nu = s0[:, None] * xi0
    oblique = ~near & ~aligned
    if m1 > 1:
        rest = proj[:, :-1]
        j0 = np.argmax(np.abs(rest), axis=-1)
        pj = rest[np.arange(len(j0)), j0]
        sj = np.where(oblique, eps**0.25 * lambda1, 0.0) * np.where(pj >= 0, 1.0, -1.0)
        nu = nu + sj[:, None] * V[np.arange(len(j0)), :, j0]
    l1 = np.sum(np.abs(nu), axis=-1)
    bound = eps**-0.25
    nu = np.where((l1 > bound)[:, None], nu * (bound / np.where(l1 > 0, l1, 1.0))[:, None], nu)
    branch = np.select([near & pos, near, aligned & pos, aligned, pos], [0, 1, 2, 3, 4], default=5)
    return nu, branch, np.where(part1, 1, 2)


def adversary_response(eps, eta, eta_hat, X, X_hat, lambda1, K, R0=None) -> np.ndarray:
    """The horizontal move nu_bar answering (eta, X) against the reference (eta_hat, X_hat)."""
    eta = np.asarray(eta, dtype=float)
    if not np.any(eta):
        raise ContractViolation("eta must be nonzero")
    if R0 is not None and (np.linalg.norm(eta_hat) > R0 * (1 + 1e-12) or np.max(np.abs(np.linalg.eigvalsh(sym(X_hat)))) > R0 * (1 + 1e-12)):
        raise ContractViolation("reference pair exceeds R0")
    nu, _, _ = adversary_moves(eps, eta, eta_hat, X, X_hat, lambda1, K)
    return nu[0]


def adversary_gap(op: SingularOperator, eps, eta, eta_hat, X, X_hat, nu, K, R0):
    """lhs - rhs of the lemma's inequality (negative means violated).

    Part 1 compares against the reference cost at (eta_hat, X_hat) minus
    eps^2 h_K(eps^1/4); part 2 against the envelope cost at (0, X_hat).
    """
    eta = np.atleast_2d(eta)
    eta_hat = np.atleast_2d(eta_hat)
    nu = np.atleast_2d(nu)
    X = np.asarray(X, dtype=float).reshape(-1, op.m1, op.m1)
    X_hat = np.asarray(X_hat, dtype=float).reshape(-1, op.m1, op.m1)
    part1 = np.linalg.norm(eta_hat, axis=-1) >= 1.0 / K
    lhs = _cost(eps, _lin(eta, nu), _quadform(X, nu), op.evaluate(eta, X))
    safe_hat = np.where(part1[:, None], eta_hat, 1.0)
    F_hat = np.where(part1, op.evaluate(safe_hat, X_hat), op.upper_envelope_at_zero(X_hat))
    lin_hat = np.where(part1, _lin(eta_hat, nu), 0.0)
    rhs = _cost(eps, lin_hat, _quadform(X_hat, nu), F_hat)
    h_K = op.omega_rR(eps**0.25, 1.0 / (2 * K), R0)
    rhs = np.where(part1, rhs - eps**2 * h_K, rhs)
    return lhs - rhs
