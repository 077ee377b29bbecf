"""Uniform grids in exponential coordinates, value layers and their interpolation.

Outside the box a layer takes its far-field constant. Axes marked ``"edge"``
are instead extended by clamping the coordinate, which is exact for data that
does not depend on that coordinate (e.g. cylinders along the centre of H^1).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .algebra import CarnotGroup, multiply

EXTEND_MODES = ("constant", "edge")
_SNAP = 1e-9


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray
    h: np.ndarray
    extend: tuple[str, ...] = ()

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        h = np.broadcast_to(np.asarray(self.h, dtype=float), lo.shape).copy()
        if lo.shape != hi.shape:
            raise ConfigurationError("lo and hi must have the same length")
        if np.any(hi <= lo):
            raise ConfigurationError("box needs lo < hi on every axis")
        if np.any(h <= 0):
            raise ConfigurationError("grid spacing must be positive")
        cells = (hi - lo) / h
        if np.any(np.abs(cells - np.rint(cells)) > 1e-6 * np.maximum(1.0, cells)):
            raise ConfigurationError(f"(hi - lo) / h must be integral, got {cells}")
        extend = tuple(self.extend) or ("constant",) * lo.size
        if len(extend) != lo.size or any(e not in EXTEND_MODES for e in extend):
            raise ConfigurationError(f"extend must list one of {EXTEND_MODES} per axis")
        for a in (lo, hi, h):
            a.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "extend", extend)

    @classmethod
    def cube(cls, half_width: float, h: float, dim: int, extend=()):
        return cls(np.full(dim, -half_width), np.full(dim, half_width), np.full(dim, h), tuple(extend))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(n) + 1 for n in np.rint((self.hi - self.lo) / self.h))

    @property
    def axes(self) -> list[np.ndarray]:
        return [self.lo[i] + self.h[i] * np.arange(n) for i, n in enumerate(self.shape)]

    def nodes(self) -> np.ndarray:
        """All grid nodes, shape (n_nodes, N), C order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def node_index(self, p) -> tuple[int, ...]:
        idx = np.rint((np.asarray(p, dtype=float) - self.lo) / self.h).astype(int)
        return tuple(idx)


@dataclass(frozen=True)
class ValueLayer:
    box: Box
    values: np.ndarray = field(repr=False)
    t: float = 0.0
    far_field: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.box.shape:
            raise ValueError(f"values shape {v.shape} does not match box {self.box.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values, t) -> "ValueLayer":
        return ValueLayer(self.box, values, float(t), self.far_field)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def build_layer(box: Box, psi, far_field: float, check_shell: bool = True) -> ValueLayer:
    """Sample ``psi`` (vectorized over an (n, N) array) at the grid nodes.

    The boundary nodes of every far-field axis must already equal the
    far-field constant, otherwise truncating to the box changes the problem.
    """
    values = np.asarray(psi(box.nodes()), dtype=float).reshape(box.shape)
    if check_shell:
        scale = max(1.0, abs(far_field))
        for ax, mode in enumerate(box.extend):
            if mode != "constant":
                continue
            for end in (0, -1):
                face = np.take(values, end, axis=ax)
                if np.any(np.abs(face - far_field) > 1e-12 * scale):
                    raise ConfigurationError(
                        f"initial datum is not equal to the far-field value {far_field} on the boundary of axis {ax}"
                    )
    return ValueLayer(box, values, 0.0, float(far_field))


def _fractional_index(box: Box, points):
    x = (np.asarray(points, dtype=float) - box.lo) / box.h
    r = np.rint(x)
    return np.where(np.abs(x - r) < _SNAP, r, x)


def sample(layer: ValueLayer, points, return_outside: bool = False):
    """Multilinear interpolation with far-field / clamped extension.

    The result is a convex combination of stored values (or the far-field
    constant), so it never leaves their range.
    """
    box = layer.box
    x = _fractional_index(box, points)
    if x.shape[-1] != box.dim:
        raise ValueError("point dimension does not match the grid")
    shape = np.asarray(box.shape)
    outside = np.zeros(x.shape[:-1], dtype=bool)
    for ax, mode in enumerate(box.extend):
        if mode == "edge":
            x[..., ax] = np.clip(x[..., ax], 0.0, shape[ax] - 1)
        else:
            outside |= (x[..., ax] < 0.0) | (x[..., ax] > shape[ax] - 1)
    x = np.where(outside[..., None], 0.0, x)
    i0 = np.clip(np.floor(x), 0, shape - 2).astype(np.intp)
    w = x - i0
    strides = np.array([int(np.prod(shape[k + 1 :])) for k in range(box.dim)], dtype=np.intp)
    base = np.sum(i0 * strides, axis=-1)
    flat = layer.values.ravel()
    out = np.zeros(x.shape[:-1])
    for corner in itertools.product((0, 1), repeat=box.dim):
        weight = np.ones(x.shape[:-1])
        offset = 0
        for ax, c in enumerate(corner):
            weight = weight * (w[..., ax] if c else 1.0 - w[..., ax])
            offset += c * strides[ax]
        out = out + weight * flat[base + offset]
    out = np.where(outside, layer.far_field, out)
    if return_outside:
        return out, outside
    return out


def _stencil_offsets(m1: int):
    """Horizontal directions used by the derivative stencil: e_i and e_i +/- e_j."""
    eye = np.eye(m1)
    dirs = [eye[i] for i in range(m1)]
    pairs = []
    for i in range(m1):
        for j in range(i + 1, m1):
            pairs.append((i, j))
            dirs.append(eye[i] + eye[j])
            dirs.append(eye[i] - eye[j])
    return np.array(dirs), pairs


def horizontal_derivatives(layer: ValueLayer, points, delta: float, g: CarnotGroup, return_breaches: bool = False):
    """Horizontal gradient and symmetrized horizontal Hessian by group-translated differences.

    Each second difference runs along a one-parameter subgroup s -> p.exp(s V)
    with V = X_i or X_i +/- X_j, so
    (X_i X_j + X_j X_i) u / 2 = [(X_i + X_j)^2 u - (X_i - X_j)^2 u] / 4.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    p = np.asarray(points, dtype=float)
    m1 = g.m1
    dirs, pairs = _stencil_offsets(m1)
    steps = g.horizontal_point(np.concatenate([dirs, -dirs]) * delta)  # (2D, N)
    targets = multiply(g, p[..., None, :], steps)
    vals, outside = sample(layer, targets, return_outside=True)
    center = sample(layer, p)
    nd = len(dirs)
    plus, minus = vals[..., :nd], vals[..., nd:]
    eta = (plus[..., :m1] - minus[..., :m1]) / (2.0 * delta)
    second = (plus - 2.0 * center[..., None] + minus) / delta**2
    hess = np.zeros(p.shape[:-1] + (m1, m1))
    for i in range(m1):
        hess[..., i, i] = second[..., i]
    for k, (i, j) in enumerate(pairs):
        mixed = (second[..., m1 + 2 * k] - second[..., m1 + 2 * k + 1]) / 4.0
        hess[..., i, j] = mixed
        hess[..., j, i] = mixed
    if return_breaches:
        return eta, hess, int(outside.sum())
    return eta, hess
