"""Property suites behind ``carnotgame verify``.

Every suite returns a JSON-ready report ``{"suite", "passed", "checks", "seconds"}``
where each check carries its measured value and tolerance.
"""

from __future__ import annotations

import time

import numpy as np

from . import algebra as alg
from .game import BRANCHES, GameConfig, adversary_gap, adversary_moves, dpp_step, move_lattice
from .grid import Box, ValueLayer, build_layer, horizontal_derivatives
from .operators import (
    brute_force_envelopes,
    check_assumptions,
    get_operator,
    random_sym,
    spectral_norm,
)

SUITES = ("algebra", "operators", "adversary", "regularity", "oracle")
ALGEBRA_GROUPS = ("euclidean:2", "heisenberg:1", "heisenberg:2", "engel")


def _check(name, value, tol, passed=None, **extra):
    ok = bool(value <= tol) if passed is None else bool(passed)
    out = {"name": name, "passed": ok, "value": float(value), "tolerance": float(tol)}
    out.update(extra)
    return out


def _report(suite, checks, t0):
    return {
        "suite": suite,
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
        "seconds": time.perf_counter() - t0,
    }


# -- algebra ----------------------------------------------------------------------


def _frame_bracket(g, p, i, j, h=1e-4):
    """[X_i, X_j](p) by central differences of the frame's coordinate columns."""
    def col(q, k):
        return alg.horizontal_frame(g, q)[..., :, k]

    Xi, Xj = col(p, i), col(p, j)
    dXj = (col(p + h * Xi, j) - col(p - h * Xi, j)) / (2 * h)
    dXi = (col(p + h * Xj, i) - col(p - h * Xj, i)) / (2 * h)
    return dXj - dXi


def algebra_suite(n_samples: int = 1000, seed: int = 0, groups=ALGEBRA_GROUPS) -> dict:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    checks = []
    for name in groups:
        g = alg.group_from_name(name)
        p, q, r = (rng.uniform(-2, 2, size=(n_samples, g.dim)) for _ in range(3))
        lam = rng.uniform(0, 10, size=(n_samples, 1))
        assoc = np.max(np.abs(alg.multiply(g, alg.multiply(g, p, q), r) - alg.multiply(g, p, alg.multiply(g, q, r))))
        checks.append(_check(f"{name}: associativity", assoc, 1e-10))
        e = np.zeros_like(p)
        ident = max(np.max(np.abs(alg.multiply(g, p, e) - p)), np.max(np.abs(alg.multiply(g, e, p) - p)))
        checks.append(_check(f"{name}: two-sided identity", ident, 0.0))
        inv = max(
            np.max(np.abs(alg.multiply(g, p, alg.inverse(g, p)))),
            np.max(np.abs(alg.multiply(g, alg.inverse(g, p), p))),
        )
        checks.append(_check(f"{name}: inverse", inv, 1e-12))
        auto = np.max(np.abs(
            np.stack([alg.dilate(g, alg.multiply(g, p[k], q[k]), lam[k, 0]) for k in range(n_samples)])
            - np.stack([alg.multiply(g, alg.dilate(g, p[k], lam[k, 0]), alg.dilate(g, q[k], lam[k, 0])) for k in range(n_samples)])
        ) / (1.0 + lam ** g.step))
        checks.append(_check(f"{name}: dilation automorphism (relative)", auto, 1e-10))
        hom = np.max(np.abs(
            np.array([alg.gauge(g, alg.dilate(g, p[k], lam[k, 0])) for k in range(n_samples)])
            - lam[:, 0] * alg.gauge(g, p)
        ) / (1.0 + lam[:, 0] * alg.gauge(g, p)))
        checks.append(_check(f"{name}: gauge homogeneity (relative)", hom, 1e-12))
        if g.law != "bch" and g.step <= 3:
            bch = np.max(np.abs(alg.bch_multiply_from_structure(g, p, q) - alg.multiply(g, p, q)))
            checks.append(_check(f"{name}: closed form vs BCH", bch, 1e-12))
        worst = 0.0
        c = g.structure_constants
        for i in range(g.m1):
            for j in range(g.m1):
                num = _frame_bracket(g, p[:50], i, j)
                # [X_i, X_j] is left-invariant: its value at p is the left translate of the algebra element c_ij
                expected = np.einsum("...ik,k->...i", _jacobian_left(g, p[:50]), c[i, j])
                worst = max(worst, float(np.max(np.abs(num - expected))))
        checks.append(_check(f"{name}: frame brackets match structure constants", worst, 1e-6))
        # structure constants respect the grading
        deg = g.degrees
        bad = 0
        for i in range(g.dim):
            for j in range(g.dim):
                for k in range(g.dim):
                    if c[i, j, k] != 0 and deg[k] != deg[i] + deg[j]:
                        bad += 1
        checks.append(_check(f"{name}: bracket closure V_a x V_b -> V_a+b", bad, 0))
    return _report("algebra", checks, t0)


def _jacobian_left(g, p, h=1e-6):
    """d/ds p.exp(s v) at s = 0 for every basis v, as an (N, N) matrix per point."""
    p = np.atleast_2d(p)
    cols = []
    for k in range(g.dim):
        v = np.zeros(g.dim)
        v[k] = h
        cols.append((alg.multiply(g, p, v) - alg.multiply(g, p, -v)) / (2 * h))
    return np.stack(cols, axis=-1)


# -- operators --------------------------------------------------------------------


def operators_suite(n_samples: int = 100_000, seed: int = 0, m1_values=(2, 3), n_brute: int = 200) -> dict:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    checks = []
    for kind in ("mcf", "pil"):
        for m1 in m1_values:
            op = get_operator(kind, m1)
            rep = check_assumptions(op, n_samples, seed=seed)
            checks.append(_check(f"{kind} m1={m1}: one-sided eigenvalue bound violations", rep["F3_violations"], 0, max_ratio=rep["F3_max_ratio"]))
            checks.append(_check(f"{kind} m1={m1}: eta-modulus violations", rep["F4_violations"], 0, max_ratio=rep["F4_max_ratio"]))
            X = random_sym(rng, (n_brute,), m1)
            worst = 0.0
            for k in range(n_brute):
                lo, hi = brute_force_envelopes(op, X[k], n_dirs=10_000)
                worst = max(worst, abs(lo - float(op.lower_envelope_at_zero(X[k]))), abs(hi - float(op.upper_envelope_at_zero(X[k]))))
            checks.append(_check(f"{kind} m1={m1}: envelopes vs direction sweep", worst, 1e-6 if m1 == 2 else 5e-2))
            eta = rng.normal(size=(n_samples // 10, m1))
            Xs = random_sym(rng, (n_samples // 10,), m1)
            c = np.exp(rng.uniform(-5, 5, size=(n_samples // 10, 1)))
            homog = np.max(np.abs(op.evaluate(c * eta, Xs) - op.evaluate(eta, Xs)))
            checks.append(_check(f"{kind} m1={m1}: 0-homogeneity", homog, 1e-12))
            A = rng.normal(size=(n_samples // 10, m1, m1))
            psd = A @ np.swapaxes(A, -1, -2)
            ell = np.max(op.evaluate(eta, Xs + psd) - op.evaluate(eta, Xs))
            checks.append(_check(f"{kind} m1={m1}: degenerate ellipticity", max(ell, 0.0), 1e-10))
            growth = np.max(np.abs(op.evaluate(eta, Xs)) - op.growth_constant * (1 + spectral_norm(Xs)))
            checks.append(_check(f"{kind} m1={m1}: linear growth", max(growth, 0.0), 1e-12))
            F = op.evaluate(eta, Xs)
            sand = max(np.max(op.lower_envelope_at_zero(Xs) - F), np.max(F - op.upper_envelope_at_zero(Xs)))
            checks.append(_check(f"{kind} m1={m1}: envelope sandwich", max(sand, 0.0), 1e-12))
    return _report("operators", checks, t0)


# -- adversary --------------------------------------------------------------------


def adversary_draws(rng, n, m1, eps, K, R0, lambda1, branch: int, part: int):
    """Random admissible (eta, eta_hat, X, X_hat) steered into one branch of the case analysis."""
    near = branch in (0, 1)
    aligned = branch in (2, 3)
    pos = branch % 2 == 0
    # reference pair
    if part == 1:
        r_hat = np.maximum(rng.uniform(1.0 / K, R0, size=n), (1.0 + 1e-9) / K)
    else:
        r_hat = rng.uniform(0.0, 1.0 / K, size=n) * (1 - 1e-9)
    u = rng.normal(size=(n, m1))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    eta_hat = u * r_hat[:, None]
    X_hat = random_sym(rng, (n,), m1)
    X_hat *= (R0 * rng.uniform(0, 1, size=n) / np.maximum(spectral_norm(X_hat), 1e-300))[:, None, None]
    # D = X_hat - X with the requested sign of its top eigenvalue
    D = random_sym(rng, (n,), m1)
    w, V = np.linalg.eigh(D)
    w = np.abs(w) * (1.0 if pos else -1.0)
    if pos:
        w[:, -1] = np.abs(w[:, -1]) + 1e-3
    w = np.sort(w, axis=-1)
    D = np.einsum("bij,bj,bkj->bik", V, w, V)
    xbound = eps**-0.5
    room = xbound - spectral_norm(X_hat)
    scale = rng.uniform(0, 1, size=n) * room / np.maximum(spectral_norm(D), 1e-300)
    D *= scale[:, None, None]
    X = X_hat - D
    w, V = np.linalg.eigh(D)
    xi0 = V[..., -1]
    target = eta_hat if part == 1 else np.zeros_like(eta_hat)
    # offset d = target - eta
    thr = eps**0.5 / lambda1
    big = eps**0.25
    if near:
        v = rng.normal(size=(n, m1))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        d = v * (big * rng.uniform(0, 1, size=n) ** (1.0 / m1))[:, None]
    else:
        perp = rng.normal(size=(n, m1))
        perp -= np.sum(perp * xi0, axis=-1, keepdims=True) * xi0
        perp /= np.maximum(np.linalg.norm(perp, axis=-1, keepdims=True), 1e-300)
        sign = np.where(rng.uniform(size=n) < 0.5, -1.0, 1.0)
        if aligned:
            a = sign * rng.uniform(thr, 2.0 * big + thr, size=n)
        else:
            a = sign * rng.uniform(0, thr, size=n) * (1 - 1e-9)
        need = np.sqrt(np.maximum(big**2 * (1 + 1e-9) - a**2, 0.0))
        b = need + rng.exponential(big, size=n)
        d = a[:, None] * xi0 + b[:, None] * perp
    eta = target - d
    # keep ||eta|| within its bound by resampling offending rows
    ok = (np.linalg.norm(eta, axis=-1) <= eps**-0.25) & (np.linalg.norm(eta, axis=-1) > 0)
    return eta[ok], eta_hat[ok], X[ok], X_hat[ok]


def adversary_suite(
    n_draws: int = 1000,
    seed: int = 0,
    operators=("mcf", "pil"),
    Ks=(1, 2, 5),
    R0s=(1.0, 5.0),
    epsilons=(1e-2, 1e-3, 1e-4),
    m1: int = 2,
    slack: float = 1e-10,
) -> dict:
    """Draws per (branch, part) cell; a violation is a gap below -slack (scaled by eps^2)."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    checks = []
    for kind in operators:
        op = get_operator(kind, m1)
        lam1 = op.lambda1
        for eps in epsilons:
            for K in Ks:
                for R0 in R0s:
                    for b in range(len(BRANCHES)):
                        if m1 == 1 and b >= 4:
                            continue
                        for part in (1, 2):
                            etas, ehs, Xs, Xhs = [], [], [], []
                            have = 0
                            while have < n_draws:
                                e, eh, X, Xh = adversary_draws(rng, 2 * n_draws, m1, eps, K, R0, lam1, b, part)
                                _, br, pr = adversary_moves(eps, e, eh, X, Xh, lam1, K)
                                keep = (br == b) & (pr == part)
                                etas.append(e[keep]); ehs.append(eh[keep]); Xs.append(X[keep]); Xhs.append(Xh[keep])
                                have += int(keep.sum())
                            eta = np.concatenate(etas)[:n_draws]
                            eh = np.concatenate(ehs)[:n_draws]
                            X = np.concatenate(Xs)[:n_draws]
                            Xh = np.concatenate(Xhs)[:n_draws]
                            nu, branch, prt = adversary_moves(eps, eta, eh, X, Xh, lam1, K)
                            gap = adversary_gap(op, eps, eta, eh, X, Xh, nu, K, R0)
                            scaled = gap / eps**2
                            viol = int(np.sum(scaled < -slack))
                            l1 = float(np.max(np.sum(np.abs(nu), axis=-1)) - eps**-0.25)
                            steered = float(np.mean((branch == b) & (prt == part)))
                            checks.append({
                                "name": f"{kind} eps={eps:g} K={K} R0={R0:g} {BRANCHES[b]} part{part}",
                                "passed": viol == 0 and l1 <= 1e-12,
                                "value": viol,
                                "tolerance": 0,
                                "min_gap_over_eps2": float(np.min(scaled)),
                                "move_l1_excess": l1,
                                "branch_hit_rate": steered,
                            })
    return _report("adversary", checks, t0)


# -- regularity -------------------------------------------------------------------


def regularity_runs(epsilons=(0.2, 0.1, 0.05), h: float = 0.05, half_width: float = 1.5, T: float = 0.1, n_pairs: int = 2000, seed: int = 0, group: str = "euclidean:2", operator: str = "mcf"):
    """(C_space, C_time) per epsilon on the smooth bump datum."""
    from .data import smooth_bump
    from .game import solve
    from .oracles import measure_lipschitz

    g = alg.group_from_name(group)
    op = get_operator(operator, g.m1)
    box = Box.cube(half_width, h, g.dim)
    # amplitude and radius keep |D^2 psi| <= 2, inside the control bound eps^-1/2 for every eps tested
    psi, ff = smooth_bump(0.2, 1.45)
    rng = np.random.default_rng(seed)
    P = rng.uniform(-1.2, 1.2, size=(n_pairs, g.dim))
    Q = P + rng.normal(scale=0.1, size=(n_pairs, g.dim))
    out = {}
    for eps in epsilons:
        cfg = GameConfig(epsilon=eps, T=T)
        layers = solve(cfg, op, psi, box, g, ff)
        out[eps] = measure_lipschitz(layers, (P, Q), g, eps, cfg.mu)
    return out


def regularity_suite(epsilons=(0.2, 0.1, 0.05), **kw) -> dict:
    t0 = time.perf_counter()
    res = regularity_runs(epsilons, **kw)
    cs = [v[0] for v in res.values()]
    ct = [v[1] for v in res.values()]
    checks = [
        _check("C_space spread (max/min)", max(cs) / max(min(cs), 1e-300), 2.0, per_eps={str(k): v[0] for k, v in res.items()}),
        _check("C_time spread (max/min)", max(ct) / max(min(ct), 1e-300), 2.0, per_eps={str(k): v[1] for k, v in res.items()}),
    ]
    return _report("regularity", checks, t0)


# -- oracle -----------------------------------------------------------------------


def oracle_suite(seed: int = 0, n_nodes: int = 100) -> dict:
    from .data import capped_quadratic, smooth_bump
    from .oracles import bruteforce_dpp_step, measure_zero_level_radius, pil_exact

    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    checks = []
    # PDE residual of the infinity-heat oracle in H^1 shrinks like delta^2
    g = alg.heisenberg(1)
    op = get_operator("pil", 2)
    pts = rng.uniform(-1, 1, size=(200, 3))
    pts = pts[np.hypot(pts[:, 0], pts[:, 1]) >= 0.5]
    res = []
    for delta in (0.1, 0.05, 0.025):
        box = Box.cube(2.0, 0.025, 3)
        layer = ValueLayer(box, pil_exact(0.0, box.nodes()).reshape(box.shape), 0.0, 0.0)
        eta, X = horizontal_derivatives(layer, pts, delta, g)
        res.append(float(np.max(np.abs(2.0 + op.evaluate(eta, X)))))
    checks.append(_check("pil oracle residual at finest delta", res[-1], 1e-8, residuals=res))
    # zero level of the exact datum is found within one cell
    box = Box.cube(1.5, 0.02, 2)
    psi, ff = capped_quadratic(1.0, 0.5, 0.5)
    r = measure_zero_level_radius(build_layer(box, psi, ff))
    checks.append(_check("radius of exact datum", abs(r - 1.0), 0.02))
    # compiled step vs naive enumeration on random configs
    configs = [
        ("euclidean:2", "mcf", Box.cube(1.5, 0.1, 2), capped_quadratic(1.0, 0.5, 0.3, rounding=0.3), GameConfig(epsilon=0.3, T=0.09)),
        ("heisenberg:1", "pil", Box.cube(1.5, 0.25, 3, extend=("constant", "constant", "edge")), capped_quadratic(1.0, 1.0, 1.0, coords=2), GameConfig(epsilon=0.4, T=0.16, mu=0.5)),
        ("euclidean:2", "mcf", Box.cube(1.5, 0.1, 2), smooth_bump(1.0, 1.0), GameConfig(epsilon=0.3, T=0.09, strategy="generic", moves="polar")),
    ]
    worst = 0.0
    for gname, kind, box, (psi, ff), cfg in configs:
        g = alg.group_from_name(gname)
        op = get_operator(kind, g.m1)
        layer = build_layer(box, psi, ff)
        t = cfg.epsilon**2
        nxt = dpp_step(layer, op, cfg, t, g)
        nodes = box.nodes()
        pick = rng.choice(len(nodes), size=min(n_nodes, len(nodes)), replace=False)
        for i in pick:
            ref = bruteforce_dpp_step(layer, op, cfg, nodes[i], g, t=t)
            worst = max(worst, abs(float(nxt.values.ravel()[i]) - ref))
    checks.append(_check("dpp_step vs brute-force enumeration", worst, 1e-12))
    return _report("oracle", checks, t0)


def run_suite(name: str, **kw) -> dict:
    suites = {
        "algebra": algebra_suite,
        "operators": operators_suite,
        "adversary": adversary_suite,
        "regularity": regularity_suite,
        "oracle": oracle_suite,
    }
    if name not in suites:
        raise KeyError(name)
    return suites[name](**kw)
