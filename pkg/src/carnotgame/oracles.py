"""Exact solutions, brute-force references and measurement utilities."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .algebra import CarnotGroup, dilate, gauge, inverse, multiply
from .game import GameConfig, _cost, _lin, _quadform, move_lattice, player1_controls
from .grid import ValueLayer, sample


class ExtinctionError(ValueError):
    pass


class MeasurementError(RuntimeError):
    pass


def euclidean_sphere_radius(t: float, r0: float, m1: int) -> float:
    """Radius of a round sphere in R^m1 under level-set mean curvature flow."""
    if m1 < 2:
        raise ValueError("m1 must be at least 2")
    s = r0**2 - 2.0 * (m1 - 1) * t
    if s < -1e-12:
        raise ExtinctionError(f"sphere of radius {r0} is extinct before t={t}")
    return math.sqrt(max(s, 0.0))


def heisenberg_cylinder_radius(t: float, r0: float) -> float:
    """Radius of the vertical cylinder p1^2 + p2^2 = r^2 in H^1 under horizontal MCF."""
    s = r0**2 - 2.0 * t
    if s < -1e-12:
        raise ExtinctionError(f"cylinder of radius {r0} is extinct before t={t}")
    return math.sqrt(max(s, 0.0))


def pil_exact(t, p):
    """p1^2 + p2^2 + 2t, a classical solution of the normalized infinity heat flow off the axis."""
    p = np.asarray(p, dtype=float)
    return p[..., 0] ** 2 + p[..., 1] ** 2 + 2.0 * np.asarray(t, dtype=float)


def pil_capped_exact(t, r, cap: float, n_nodes: int = 200):
    """E[min((r + sqrt(2t) Z)^2, cap)], Z standard normal.

    For data depending on the horizontal radius only, the normalized infinity
    heat flow is the one-dimensional heat equation u_t = u_rr in r, so this is
    the exact solution for the capped datum min(r^2, cap).
    """
    r = np.asarray(r, dtype=float)
    if t == 0:
        return np.minimum(r**2, cap)
    z, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    w = w / w.sum()
    x = r[..., None] + math.sqrt(2.0 * t) * z
    return np.sum(w * np.minimum(x**2, cap), axis=-1)


@dataclass(frozen=True)
class RadialProfile:
    times: tuple
    radii: tuple

    def __post_init__(self):
        if len(self.times) != len(self.radii):
            raise ValueError("times and radii must have the same length")
        if any(r < 0 for r in self.radii):
            raise ValueError("radii must be nonnegative")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")

    def write_csv(self, path, exact=None):
        """Rows ``t, r_measured, r_exact, rel_err``; ``exact`` maps t to the reference radius."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "r_measured", "r_exact", "rel_err"])
            for t, r in zip(self.times, self.radii):
                if exact is None:
                    w.writerow([f"{t:.17g}", f"{r:.17g}", "", ""])
                    continue
                try:
                    re = exact(t)
                except ExtinctionError:
                    w.writerow([f"{t:.17g}", f"{r:.17g}", "", ""])
                    continue
                rel = abs(r - re) / re if re > 0 else math.inf
                w.writerow([f"{t:.17g}", f"{r:.17g}", f"{re:.17g}", f"{rel:.17g}"])


def measure_zero_level_radius(layer: ValueLayer, center=None, n_rays: int = 32, return_excluded: bool = False):
    """Mean distance from ``center`` to the first sign change of u along horizontal rays.

    Rays live in the plane of the first two coordinates; steps are h/4 and the
    root is linearly interpolated between the bracketing samples.
    """
    box = layer.box
    if center is None:
        center = np.zeros(box.dim)
    center = np.asarray(center, dtype=float)
    h = float(np.min(box.h[:2]))
    reach = float(np.max(np.abs(np.concatenate([box.hi[:2] - center[:2], box.lo[:2] - center[:2]])))) * math.sqrt(2)
    s = np.arange(0.0, reach + h, h / 4.0)
    th = 2.0 * np.pi * np.arange(n_rays) / n_rays
    pts = np.broadcast_to(center, (n_rays, len(s), box.dim)).copy()
    pts[..., 0] += np.cos(th)[:, None] * s
    pts[..., 1] += np.sin(th)[:, None] * s
    vals = sample(layer, pts)
    radii = []
    for v in vals:
        sign = np.signbit(v)
        change = np.nonzero(sign[1:] != sign[:-1])[0]
        if change.size == 0:
            continue
        i = change[0]
        a, b = v[i], v[i + 1]
        frac = a / (a - b) if a != b else 0.0
        radii.append(s[i] + frac * (s[i + 1] - s[i]))
    excluded = n_rays - len(radii)
    if not radii:
        raise MeasurementError("no ray crosses the zero level")
    r = float(np.mean(radii))
    return (r, excluded) if return_excluded else r


def bruteforce_dpp_step(u_prev: ValueLayer, op, cfg: GameConfig, p, g: CarnotGroup, t: float = 0.0) -> float:
    """Discounted inf-sup at one node by plain nested loops."""
    p = np.asarray(p, dtype=float)
    eps = cfg.epsilon
    moves = move_lattice(cfg, g.m1, u_prev.box.h[: g.m1])
    controls = [(c.eta, c.X) for c in player1_controls(u_prev, p, cfg, op, g)]
    landing = []
    for nu in moves:
        q = dilate(g, g.horizontal_point(nu), eps)
        landing.append(float(sample(u_prev, multiply(g, p, q))))
    best_control = math.inf
    for eta, X in controls:
        if eta is None:
            F = float(op.upper_envelope_at_zero(X, t, p))
            eta_vec = np.zeros(g.m1)
        else:
            F = float(op.evaluate(eta, X, t, p))
            eta_vec = eta
        best_move = -math.inf
        for nu, u_next in zip(moves, landing):
            val = u_next + float(_cost(eps, _lin(eta_vec, nu), _quadform(X, nu), F))
            best_move = max(best_move, val)
        best_control = min(best_control, best_move)
    return best_control / (1.0 + cfg.mu * eps**2)


def measure_lipschitz(layers, pairs, g: CarnotGroup, epsilon: float, mu: float = 0.0):
    """Empirical (C_space, C_time).

    C_space = sup over layers and pairs of |u(p) - u(q)| / |p q^-1|_G.
    C_time  = sup over k >= 1 and p of |u_k(p) - u_{k-1}(p)| / (eps^2 (1+mu eps^2)^-k),
    evaluated at the pair points.
    """
    if len(layers) < 2:
        raise ValueError("need at least two layers")
    P, Q = (np.asarray(a, dtype=float) for a in pairs)
    dist = gauge(g, multiply(g, P, inverse(g, Q)))
    keep = dist > 0
    P, Q, dist = P[keep], Q[keep], dist[keep]
    c_space = 0.0
    for layer in layers:
        if len(dist):
            c_space = max(c_space, float(np.max(np.abs(sample(layer, P) - sample(layer, Q)) / dist)))
    pts = np.concatenate([P, Q]) if len(P) else np.asarray(pairs[0], dtype=float)
    c_time = 0.0
    prev = sample(layers[0], pts)
    for k, layer in enumerate(layers[1:], start=1):
        cur = sample(layer, pts)
        scale = epsilon**2 * (1.0 + mu * epsilon**2) ** (-k)
        c_time = max(c_time, float(np.max(np.abs(cur - prev))) / scale)
        prev = cur
    return c_space, c_time
