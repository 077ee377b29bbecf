"""Named initial data. Each factory returns (psi, far_field) with psi vectorized over (n, N)."""

from __future__ import annotations

import numpy as np


def constant(value: float = 0.0):
    value = float(value)
    return (lambda p: np.full(np.asarray(p).shape[:-1], value)), value


def soft_cap(s, cap: float, width: float = 0.0):
    """min(s, cap) with the corner smoothed over [cap - width, cap + width].

    On the blend interval the slope falls from 1 to 0 along the quintic
    smoothstep, so the result is C^3, nondecreasing, equal to s below
    cap - width and to cap above cap + width. Monotone reshaping keeps level
    sets, which is what geometric flows care about.
    """
    s = np.asarray(s, dtype=float)
    if width <= 0:
        return np.minimum(s, cap)
    x = np.clip((s - cap + width) / (2.0 * width), 0.0, 1.0)
    # integral of the smoothstep 6x^5 - 15x^4 + 10x^3
    ramp = x**4 * (x * (x - 3.0) + 2.5)
    return np.where(s >= cap + width, cap, np.minimum(s, cap + width) - 2.0 * width * ramp)


def capped_quadratic(r0: float = 1.0, scale: float = 1.0, cap: float = 1.0, coords: int | None = None, center=None, rounding: float = 0.0):
    """soft_cap(scale (|p_h - c|^2 - r0^2), cap, rounding) over the first ``coords`` coordinates."""
    if cap <= 0 or scale <= 0:
        raise ValueError("scale and cap must be positive")
    if rounding < 0:
        raise ValueError("rounding must be nonnegative")

    def psi(p):
        p = np.asarray(p, dtype=float)
        k = coords if coords is not None else p.shape[-1]
        x = p[..., :k] - (0.0 if center is None else np.asarray(center, float)[:k])
        return soft_cap(scale * (np.sum(x * x, axis=-1) - r0**2), cap, rounding)

    return psi, float(cap)


def quadratic_cylinder(r0: float = 1.0, scale: float = 1.0, cap: float = 1.0, rounding: float = 0.0):
    """Capped quadratic in (p1, p2) only: a vertical cylinder in H^1."""
    return capped_quadratic(r0, scale, cap, coords=2, rounding=rounding)


def smooth_bump(amplitude: float = 1.0, radius: float = 1.0, center=None):
    """A exp(1 - 1/(1 - |p - c|^2 / R^2)) inside the ball, 0 outside (C-infinity, compact support)."""
    if radius <= 0:
        raise ValueError("radius must be positive")

    def psi(p):
        p = np.asarray(p, dtype=float)
        c = 0.0 if center is None else np.asarray(center, float)
        s = np.sum((p - c) ** 2, axis=-1) / radius**2
        inside = s < 1.0
        safe = np.where(inside, s, 0.0)
        return np.where(inside, amplitude * np.exp(1.0 - 1.0 / (1.0 - safe)), 0.0)

    return psi, 0.0


LIBRARY = {
    "constant": constant,
    "capped-quadratic": capped_quadratic,
    "quadratic-cylinder": quadratic_cylinder,
    "smooth-bump": smooth_bump,
}


def initial_datum(name: str, **params):
    try:
        factory = LIBRARY[name]
    except KeyError:
        raise ValueError(f"unknown initial datum {name!r}; known: {sorted(LIBRARY)}") from None
    return factory(**params)
