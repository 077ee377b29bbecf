"""Carnot group algebra in exponential coordinates of the first kind.

Points are plain float arrays whose last axis has length ``N``; every function
broadcasts over leading axes so whole grids of points can be translated at once.
Shipped groups: Euclidean R^N (step 1), Heisenberg H^n (step 2), Engel E^4 (step 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class UnsupportedGroupError(ValueError):
    pass


@dataclass(frozen=True)
class CarnotGroup:
    """Stratified nilpotent group described by its structure constants.

    ``structure_constants[i, j, k]`` is the coefficient of ``e_k`` in ``[e_i, e_j]``.
    ``law`` selects the multiplication routine: ``"euclidean"``, ``"heisenberg"``
    (closed form) or ``"bch"`` (truncated Baker-Campbell-Hausdorff series).
    """

    name: str
    strata_dims: tuple[int, ...]
    structure_constants: np.ndarray = field(repr=False, compare=False)
    law: str = "bch"

    def __post_init__(self):
        c = np.asarray(self.structure_constants, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "structure_constants", c)
        n = self.dim
        if c.shape != (n, n, n):
            raise ValueError(f"structure constants must have shape {(n, n, n)}, got {c.shape}")

    @property
    def step(self) -> int:
        return len(self.strata_dims)

    @property
    def dim(self) -> int:
        return int(sum(self.strata_dims))

    @property
    def m1(self) -> int:
        return self.strata_dims[0]

    @property
    def degrees(self) -> np.ndarray:
        """Layer index (1-based) of every coordinate."""
        return np.repeat(np.arange(1, self.step + 1), self.strata_dims)

    def layer_slice(self, j: int) -> slice:
        if not 1 <= j <= self.step:
            raise IndexError(f"layer {j} out of range 1..{self.step}")
        start = sum(self.strata_dims[: j - 1])
        return slice(start, start + self.strata_dims[j - 1])

    def identity(self) -> np.ndarray:
        return np.zeros(self.dim)

    def horizontal_point(self, nu) -> np.ndarray:
        """The point ``(nu, 0, ..., 0)``; ``nu`` may carry leading axes."""
        nu = np.asarray(nu, dtype=float)
        out = np.zeros(nu.shape[:-1] + (self.dim,))
        out[..., : self.m1] = nu
        return out


def euclidean(n: int) -> CarnotGroup:
    return CarnotGroup(f"euclidean:{n}", (n,), np.zeros((n, n, n)), law="euclidean")


def heisenberg(n: int = 1) -> CarnotGroup:
    """H^n with coordinates (x_1..x_n, y_1..y_n, t) and [X_j, Y_j] = T."""
    dim = 2 * n + 1
    c = np.zeros((dim, dim, dim))
    for j in range(n):
        c[j, n + j, 2 * n] = 1.0
        c[n + j, j, 2 * n] = -1.0
    return CarnotGroup(f"heisenberg:{n}", (2 * n, 1), c, law="heisenberg")


def engel() -> CarnotGroup:
    """E^4 with [X1, X2] = X3, [X1, X3] = X4, [X2, X3] = X4.

    These are the brackets of the frame published for the Engel group, computed
    at the origin; the multiplication is then the BCH series, which terminates
    at step 3.
    """
    c = np.zeros((4, 4, 4))
    for i, j, k in ((0, 1, 2), (0, 2, 3), (1, 2, 3)):
        c[i, j, k] = 1.0
        c[j, i, k] = -1.0
    return CarnotGroup("engel", (2, 1, 1), c, law="bch")


def group_from_name(name: str) -> CarnotGroup:
    """Parse ``"euclidean:N"``, ``"heisenberg:n"`` or ``"engel"``."""
    kind, _, arg = name.strip().lower().partition(":")
    if kind == "engel" and not arg:
        return engel()
    if kind in ("euclidean", "heisenberg"):
        try:
            n = int(arg) if arg else (2 if kind == "euclidean" else 1)
        except ValueError:
            raise UnsupportedGroupError(f"bad group size in {name!r}") from None
        if n < 1:
            raise UnsupportedGroupError(f"group size must be positive in {name!r}")
        return euclidean(n) if kind == "euclidean" else heisenberg(n)
    raise UnsupportedGroupError(f"unknown group {name!r}")


def _check(g: CarnotGroup, *points):
    for p in points:
        if p.shape[-1] != g.dim:
            raise ValueError(f"point has dimension {p.shape[-1]}, group {g.name} needs {g.dim}")


def bracket(g: CarnotGroup, x, y) -> np.ndarray:
    """Lie bracket of algebra elements given in the basis e_1..e_N."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.einsum("...i,...j,ijk->...k", x, y, g.structure_constants)


def bch_multiply_from_structure(g: CarnotGroup, p, q) -> np.ndarray:
    """p . q = p + q + [p,q]/2 + ([p,[p,q]] - [q,[p,q]])/12, exact for step <= 3."""
    if g.step > 3:
        raise UnsupportedGroupError(f"BCH truncation is only exact up to step 3 (got {g.step})")
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check(g, p, q)
    pq = bracket(g, p, q)
    out = p + q + 0.5 * pq
    if g.step == 3:
        out = out + (bracket(g, p, pq) - bracket(g, q, pq)) / 12.0
    return out


def multiply(g: CarnotGroup, p, q) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check(g, p, q)
    if g.law == "euclidean":
        return p + q
    if g.law == "heisenberg":
        n = g.m1 // 2
        out = p + q
        x_p, y_p = p[..., :n], p[..., n : 2 * n]
        x_q, y_q = q[..., :n], q[..., n : 2 * n]
        out[..., 2 * n] += 0.5 * np.sum(x_p * y_q - y_p * x_q, axis=-1)
        return out
    return bch_multiply_from_structure(g, p, q)


def inverse(g: CarnotGroup, p) -> np.ndarray:
    # exp(X)^-1 = exp(-X) in exponential coordinates of the first kind
    p = np.asarray(p, dtype=float)
    _check(g, p)
    return -p


def dilate(g: CarnotGroup, p, lam: float) -> np.ndarray:
    if lam < 0:
        raise ValueError("dilation factor must be nonnegative")
    p = np.asarray(p, dtype=float)
    _check(g, p)
    return p * float(lam) ** g.degrees


def gauge(g: CarnotGroup, p) -> np.ndarray:
    """Homogeneous norm sum_j sum_i |p_{j,i}|^(1/j)."""
    p = np.asarray(p, dtype=float)
    _check(g, p)
    return np.sum(np.abs(p) ** (1.0 / g.degrees), axis=-1)


def layer_component(g: CarnotGroup, p, j: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p[..., g.layer_slice(j)]


def horizontal_frame(g: CarnotGroup, p) -> np.ndarray:
    """Columns X_1(p), ..., X_{m1}(p) of the left-invariant horizontal frame.

    X_i(p) = d/ds p.exp(s e_i) at s = 0, which for step <= 3 equals
    e_i + [p, e_i]/2 + [p, [p, e_i]]/12.
    """
    p = np.asarray(p, dtype=float)
    _check(g, p)
    basis = np.eye(g.dim)[: g.m1]  # (m1, N)
    pp = p[..., None, :]
    ad = bracket(g, pp, basis)
    cols = basis + 0.5 * ad + bracket(g, pp, ad) / 12.0
    return np.swapaxes(cols, -1, -2)
