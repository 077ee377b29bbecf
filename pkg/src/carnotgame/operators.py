"""Singular second-order operators F(t, p, eta, X) and their envelopes at eta = 0.

All evaluators broadcast: ``eta`` has shape (..., m1) and ``X`` (..., m1, m1).
Norms of matrices are spectral norms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


def sym(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def spectral_norm(X) -> np.ndarray:
    return np.max(np.abs(np.linalg.eigvalsh(sym(X))), axis=-1)


def positive_top_eigenvalue(X) -> np.ndarray:
    """E+(X) = max(0, largest eigenvalue of X)."""
    return np.maximum(np.linalg.eigvalsh(sym(X))[..., -1], 0.0)


def _quad(X, v):
    # <X v, v> summed in a fixed order so batched and scalar paths agree bitwise
    m = v.shape[-1]
    out = 0.0
    for i in range(m):
        for j in range(m):
            out = out + X[..., i, j] * v[..., i] * v[..., j]
    return out


def _unit_quad(X, eta):
    eta = np.asarray(eta, dtype=float)
    return _quad(np.asarray(X, dtype=float), eta) / np.sum(eta * eta, axis=-1)


class SingularOperator:
    """Base class: subclasses provide ``evaluate`` and the two envelopes.

    ``lambda0``/``lambda1`` are the constants of the sup bound on F(., O) and of
    the one-sided eigenvalue bound; ``omega_rR`` is the eta-modulus used on the
    region ||eta|| >= r, ||X|| <= R. Operators shipped here do not depend on
    (t, p), so their (t, p)-modulus is identically zero.
    """

    kind = "custom"

    def __init__(self, m1: int):
        if m1 < 1:
            raise ValueError("m1 must be positive")
        self.m1 = int(m1)

    lambda0 = 0.0

    @property
    def lambda1(self) -> float:
        raise NotImplementedError

    @property
    def growth_constant(self) -> float:
        """C in |F(eta, X)| <= C (1 + ||X||)."""
        return self.lambda1**2 * self.m1 / 2.0 + self.lambda0

    def omega_rR(self, s, r: float, R: float):
        return 4.0 * self.m1 * R * np.asarray(s, dtype=float) / r

    def omega_tp(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def evaluate(self, eta, X, t=0.0, p=None):
        raise NotImplementedError

    def lower_envelope_at_zero(self, X, t=0.0, p=None):
        raise NotImplementedError

    def upper_envelope_at_zero(self, X, t=0.0, p=None):
        raise NotImplementedError

    def assumption_constants(self):
        return self.lambda0, self.lambda1, self.omega_rR

    def __repr__(self):
        return f"{type(self).__name__}(m1={self.m1})"


class MeanCurvatureOperator(SingularOperator):
    """F(eta, X) = -tr[(I - eta (x) eta / |eta|^2) X]."""

    kind = "mcf"

    @property
    def lambda1(self) -> float:
        return float(np.sqrt(2.0 * (self.m1 - 1)))

    def evaluate(self, eta, X, t=0.0, p=None):
        X = np.asarray(X, dtype=float)
        return -(np.trace(X, axis1=-2, axis2=-1) - _unit_quad(X, eta))

    def lower_envelope_at_zero(self, X, t=0.0, p=None):
        X = sym(X)
        return -np.trace(X, axis1=-2, axis2=-1) + np.linalg.eigvalsh(X)[..., 0]

    def upper_envelope_at_zero(self, X, t=0.0, p=None):
        X = sym(X)
        return -np.trace(X, axis1=-2, axis2=-1) + np.linalg.eigvalsh(X)[..., -1]


class InfinityLaplaceOperator(SingularOperator):
    """F(eta, X) = -<X eta, eta> / |eta|^2 (normalized parabolic infinity Laplacian)."""

    kind = "pil"

    @property
    def lambda1(self) -> float:
        return float(np.sqrt(2.0))

    def evaluate(self, eta, X, t=0.0, p=None):
        return -_unit_quad(X, eta)

    def lower_envelope_at_zero(self, X, t=0.0, p=None):
        return -np.linalg.eigvalsh(sym(X))[..., -1]

    def upper_envelope_at_zero(self, X, t=0.0, p=None):
        return -np.linalg.eigvalsh(sym(X))[..., 0]


@dataclass
class CustomOperator(SingularOperator):
    """Plug-in operator; the caller vouches for continuity and supplies constants."""

    m1: int
    func: Callable
    lower: Callable
    upper: Callable
    lambda0_value: float
    lambda1_value: float
    omega: Callable | None = None
    kind: str = "custom"

    @property
    def lambda0(self):
        return self.lambda0_value

    @property
    def lambda1(self):
        return self.lambda1_value

    def omega_rR(self, s, r, R):
        if self.omega is None:
            raise ValueError("custom operator did not supply an eta-modulus")
        return self.omega(np.asarray(s, dtype=float), r, R)

    def evaluate(self, eta, X, t=0.0, p=None):
        return self.func(eta, X, t, p)

    def lower_envelope_at_zero(self, X, t=0.0, p=None):
        return self.lower(X, t, p)

    def upper_envelope_at_zero(self, X, t=0.0, p=None):
        return self.upper(X, t, p)


_REGISTRY = {"mcf": MeanCurvatureOperator, "pil": InfinityLaplaceOperator}


def register_operator(name: str, factory: Callable[[int], SingularOperator]):
    _REGISTRY[name.lower()] = factory


def get_operator(name: str, m1: int) -> SingularOperator:
    try:
        factory = _REGISTRY[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown operator {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(m1)


# -- random verification ---------------------------------------------------------


def random_sym(rng, size, m1, scale=1.0):
    A = rng.normal(size=tuple(size) + (m1, m1)) * scale
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def brute_force_envelopes(op: SingularOperator, X, n_dirs: int = 10_000):
    """Min and max of F(eta, X) over sampled unit eta (independent envelope check)."""
    X = np.asarray(X, dtype=float)
    if op.m1 == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif op.m1 == 2:
        th = np.linspace(0.0, 2.0 * np.pi, n_dirs, endpoint=False)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    else:
        dirs = np.random.default_rng(12345).normal(size=(n_dirs, op.m1))
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    vals = op.evaluate(dirs, np.broadcast_to(X, (len(dirs),) + X.shape))
    return float(vals.min()), float(vals.max())


def check_assumptions(op: SingularOperator, n_samples: int, seed: int = 0, tol: float = 1e-10) -> dict:
    """Random sweep of the one-sided eigenvalue bound and the eta-modulus.

    Returns a report with violation counts, the largest observed ratio
    lhs / rhs for each inequality and a witness for the first violation.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    m1 = op.m1
    lam1 = op.lambda1
    report = {"operator": op.kind, "m1": m1, "n_samples": n_samples}

    # (one-sided eigenvalue bound) F(eta, X) - F(eta, Xh) <= lambda1^2/2 E+(Xh - X)
    eta = rng.normal(size=(n_samples, m1))
    scales = 10.0 ** rng.uniform(-2, 2, size=(n_samples, 1, 1))
    X = random_sym(rng, (n_samples,), m1) * scales
    Xh = random_sym(rng, (n_samples,), m1) * scales
    lhs = op.evaluate(eta, X) - op.evaluate(eta, Xh)
    rhs = lam1**2 / 2.0 * positive_top_eigenvalue(Xh - X)
    bad = lhs > rhs + tol * (1.0 + np.abs(rhs))
    pos = rhs > 0
    report["F3_violations"] = int(bad.sum())
    report["F3_max_ratio"] = float(np.max(lhs[pos] / rhs[pos])) if pos.any() else 0.0
    if bad.any():
        i = int(np.argmax(bad))
        report["F3_witness"] = {"eta": eta[i].tolist(), "X": X[i].tolist(), "Xh": Xh[i].tolist()}

    # (eta-modulus) F(eta_h, X) - F(eta, X) <= omega_{r,R}(|eta_h - eta|) for |eta|,|eta_h| >= r, ||X|| <= R
    r = 10.0 ** rng.uniform(-2, 1, size=n_samples)
    R = 10.0 ** rng.uniform(-2, 2, size=n_samples)

    def _at_least(norm_floor):
        v = rng.normal(size=(n_samples, m1))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        return v * (norm_floor * (1.0 + rng.exponential(1.0, size=n_samples)))[:, None]

    e1 = _at_least(r)
    # half the draws are close pairs, which is where a linear modulus is tight
    near = e1 + rng.normal(size=(n_samples, m1)) * (r * 10.0 ** rng.uniform(-4, 0, size=n_samples))[:, None]
    e2 = np.where((np.arange(n_samples) % 2 == 0)[:, None], _at_least(r), near)
    n2 = np.linalg.norm(e2, axis=-1)
    e2 = np.where((n2 < r)[:, None], e2 / n2[:, None] * r[:, None], e2)
    Y = random_sym(rng, (n_samples,), m1)
    Y = Y / np.maximum(spectral_norm(Y), 1e-300)[:, None, None] * (R * rng.uniform(0, 1, size=n_samples))[:, None, None]
    lhs4 = op.evaluate(e2, Y) - op.evaluate(e1, Y)
    rhs4 = op.omega_rR(np.linalg.norm(e2 - e1, axis=-1), r, R)
    bad4 = lhs4 > rhs4 + tol * (1.0 + np.abs(rhs4))
    pos4 = rhs4 > 0
    report["F4_violations"] = int(bad4.sum())
    report["F4_max_ratio"] = float(np.max(lhs4[pos4] / rhs4[pos4])) if pos4.any() else 0.0
    if bad4.any():
        i = int(np.argmax(bad4))
        report["F4_witness"] = {"eta": e1[i].tolist(), "eta_hat": e2[i].tolist(), "X": Y[i].tolist(), "r": r[i], "R": R[i]}
    report["passed"] = report["F3_violations"] == 0 and report["F4_violations"] == 0
    return report
