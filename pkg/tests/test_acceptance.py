"""Acceptance criteria 1-9 at their stated tolerances.

Each test records a one-line verdict in ``RESULTS``; ``conftest.py`` prints
them at the end of the session, and running this file directly prints them
as they complete. Heavy runs (criteria 5-7) take tens of minutes on one core.
"""

import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from carnotgame import algebra as alg
from carnotgame.data import capped_quadratic, constant, quadratic_cylinder, smooth_bump
from carnotgame.game import GameConfig, solve
from carnotgame.grid import Box, build_layer
from carnotgame.operators import get_operator
from carnotgame.oracles import heisenberg_cylinder_radius, measure_zero_level_radius, pil_capped_exact, pil_exact
from carnotgame.verify import oracle_suite, run_suite

RESULTS: dict[int, str] = {}
HEISENBERG_EXTEND = ("constant", "constant", "edge")


def record(n: int, passed: bool, detail: str):
    line = f"criterion {n}: {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line, flush=True)
    return passed


def _suite(n, name, limit, **kw):
    report = run_suite(name, **kw)
    failed = [c["name"] for c in report["checks"] if not c["passed"]]
    ok = report["passed"] and report["seconds"] < limit
    detail = f"{name} suite, {len(report['checks'])} checks, {report['seconds']:.1f}s (limit {limit}s)"
    if failed:
        detail += f", failed: {failed}"
    assert record(n, ok, detail), detail


def test_criterion_1_algebra():
    _suite(1, "algebra", 5.0, n_samples=1000)


def test_criterion_2_operators():
    _suite(2, "operators", 30.0, n_samples=100_000)


def test_criterion_3_adversary():
    _suite(3, "adversary", 60.0, n_draws=1000)


def test_criterion_4_dpp_cross_validation():
    t0 = time.perf_counter()
    report = oracle_suite(n_nodes=100)
    dpp = next(c for c in report["checks"] if c["name"].startswith("dpp_step"))
    g = alg.euclidean(2)
    op = get_operator("mcf", 2)
    box = Box.cube(1.5, 0.1, 2)
    const_err, bound_excess = 0.0, -math.inf
    runs = [
        (constant(0.7), GameConfig(epsilon=0.05, T=0.0125)),
        (constant(-1.3), GameConfig(epsilon=0.05, T=0.0125, strategy="generic")),
    ]
    for (psi, ff), cfg in runs:
        layers = solve(cfg, op, psi, box, g, ff)
        const_err = max(const_err, max(float(np.max(np.abs(L.values - ff))) for L in layers))
        bound_excess = max(bound_excess, max(L.sup_norm for L in layers) - layers[0].sup_norm)
    for psi, ff in (capped_quadratic(1.0, 0.5, 0.3, rounding=0.3), smooth_bump(1.0, 1.0)):
        layers = solve(GameConfig(epsilon=0.2, T=0.2), op, psi, box, g, ff)
        bound_excess = max(bound_excess, max(L.sup_norm for L in layers) - layers[0].sup_norm)
    seconds = time.perf_counter() - t0
    ok = dpp["value"] <= 1e-12 and const_err <= 1e-8 and bound_excess <= 1e-9 and seconds < 120
    detail = f"dpp vs brute force {dpp['value']:.1e} (<=1e-12), constant drift {const_err:.1e} (<=1e-8), bound excess {bound_excess:.1e} (<=1e-9), {seconds:.1f}s"
    assert record(4, ok, detail), detail


def circle_radius(eps, h=0.02, T=0.25, moves="grid"):
    g = alg.euclidean(2)
    box = Box.cube(1.5, h, 2)
    psi, ff = capped_quadratic(1.0, 0.5, 0.3, rounding=0.3)
    t0 = time.perf_counter()
    layers = solve(GameConfig(epsilon=eps, T=T, moves=moves), get_operator("mcf", 2), psi, box, g, ff)
    return measure_zero_level_radius(layers[-1]), layers[-1].t, time.perf_counter() - t0


def test_criterion_5_euclidean_circle():
    exact = math.sqrt(0.5)
    errs, parts, last_time = [], [], 0.0
    for eps in (0.2, 0.1, 0.05):
        r, t, sec = circle_radius(eps)
        errs.append(abs(r - exact) / exact)
        parts.append(f"eps={eps}: r={r:.4f} (t={t:.3f}) err={errs[-1]:.2%} {sec:.0f}s")
        last_time = sec
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    ok = errs[-1] <= 0.05 and monotone and last_time < 600
    detail = "; ".join(parts) + f"; monotone={monotone}"
    assert record(5, ok, detail), detail


def test_criterion_6_heisenberg_cylinder():
    g = alg.heisenberg(1)
    box = Box.cube(1.5, 0.05, 3, HEISENBERG_EXTEND)
    psi, ff = quadratic_cylinder(1.0, 0.5, 0.3, rounding=0.3)
    t0 = time.perf_counter()
    layers = solve(GameConfig(epsilon=0.1, T=0.2), get_operator("mcf", 2), psi, box, g, ff)
    sec = time.perf_counter() - t0
    r = measure_zero_level_radius(layers[-1])
    exact = heisenberg_cylinder_radius(0.2, 1.0)
    err = abs(r - exact) / exact
    detail = f"r={r:.4f} vs {exact:.4f} err={err:.2%} (<=8%), t={layers[-1].t:.3f}, {sec:.0f}s single-thread"
    assert record(6, err <= 0.08, detail), detail


def pil_errors(eps, t=0.1, cap=2.25):
    g = alg.heisenberg(1)
    box = Box.cube(1.5, 0.05, 3, HEISENBERG_EXTEND)
    # min(r^2, cap) equals pil_exact at t = 0 for r^2 <= cap; cap = 2.25 is the
    # largest level that is still constant on the box shell
    psi, ff = capped_quadratic(0.0, 1.0, cap, coords=2)
    t0 = time.perf_counter()
    layers = solve(GameConfig(epsilon=eps, T=t), get_operator("pil", 2), psi, box, g, ff)
    sec = time.perf_counter() - t0
    last = layers[-1]
    nodes = box.nodes()
    r2 = nodes[:, 0] ** 2 + nodes[:, 1] ** 2
    region = (r2 >= 0.25) & (r2 <= 0.81)
    u = last.values.ravel()[region]
    e_exact = float(np.max(np.abs(u - pil_exact(last.t, nodes[region]))))
    e_capped = float(np.max(np.abs(u - pil_capped_exact(last.t, np.sqrt(r2[region]), cap))))
    return e_exact, e_capped, last.t, sec


def test_criterion_7_pil_exact():
    e1, c1, t1, s1 = pil_errors(0.1)
    e2, c2, t2, s2 = pil_errors(0.05)
    ok = e2 <= 0.05 and e2 < e1
    detail = (
        f"L_inf vs pil_exact: eps=0.1 {e1:.4f} (t={t1:.3f}), eps=0.05 {e2:.4f} (<=0.05, t={t2:.3f}); "
        f"vs capped-datum solution: {c1:.4f}, {c2:.4f}; {s1 + s2:.0f}s"
    )
    assert record(7, ok, detail), detail


def test_criterion_8_regularity():
    _suite(8, "regularity", 300.0)


def test_criterion_9_determinism(tmp_path):
    cfg = tmp_path / "det.ini"
    cfg.write_text(
        "[group]\nname = euclidean:2\n[operator]\nname = mcf\n[game]\nepsilon = 0.2\nT = 0.12\n"
        "[grid]\nh = 0.05\nhalf_width = 1.5\n[initial_data]\nname = capped-quadratic\nr0 = 1\nscale = 0.5\n"
        "cap = 0.3\nrounding = 0.3\n"
    )
    outs = {}
    for threads in ("1", "8"):
        out = tmp_path / f"t{threads}"
        env = {**os.environ, "THREADS": threads}
        subprocess.run([sys.executable, "-m", "carnotgame.cli", "solve", str(cfg), "--out", str(out)], check=True, env=env, capture_output=True)
        outs[threads] = {p.name: p.read_bytes() for p in sorted(out.glob("layer_*.csv"))}
    same = outs["1"].keys() == outs["8"].keys() and all(outs["1"][k] == outs["8"][k] for k in outs["1"])
    detail = f"{len(outs['1'])} layer CSVs, THREADS=1 vs THREADS=8 byte-identical: {same}"
    assert record(9, same, detail), detail


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
