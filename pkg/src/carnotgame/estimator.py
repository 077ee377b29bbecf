"""scikit-learn style facade over the layer solver.

``fit`` runs the backward-in-time game from the configured initial datum and
keeps every layer; ``predict`` interpolates the value function at arbitrary
points and times.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_scalar_in, check_time
from .algebra import group_from_name
from .data import initial_datum
from .game import GameConfig, StepDiagnostics, solve
from .grid import Box, sample
from .oracles import measure_zero_level_radius
from .operators import get_operator


class CarnotGameSolver(BaseEstimator):
    """Value function of the two-player game on a cube ``[-half_width, half_width]^N``.

    Parameters mirror the CLI configuration. ``datum_params`` is passed to the
    named initial datum from :mod:`carnotgame.data`.

    Attributes set by ``fit``: ``layers_``, ``config_``, ``group_``,
    ``diagnostics_``, ``n_features_in_``.
    """

    def __init__(
        self,
        group="euclidean:2",
        operator="mcf",
        epsilon=0.1,
        T=0.1,
        h=0.05,
        half_width=1.5,
        extend=(),
        datum="capped-quadratic",
        datum_params=None,
        mu=0.0,
        strategy="guided",
        moves="polar",
    ):
        self.group = group
        self.operator = operator
        self.epsilon = epsilon
        self.T = T
        self.h = h
        self.half_width = half_width
        self.extend = extend
        self.datum = datum
        self.datum_params = datum_params
        self.mu = mu
        self.strategy = strategy
        self.moves = moves

    def fit(self, X=None, y=None):
        """Solve the game. ``X`` and ``y`` are ignored and exist for API symmetry."""
        eps = check_scalar_in(self.epsilon, "epsilon", 0.0, 1.0, lo_open=True, hi_open=True)
        T = check_scalar_in(self.T, "T", 0.0)
        h = check_scalar_in(self.h, "h", 0.0, lo_open=True)
        hw = check_scalar_in(self.half_width, "half_width", 0.0, lo_open=True)
        g = group_from_name(self.group)
        op = get_operator(self.operator, g.m1)
        cfg = GameConfig(epsilon=eps, T=T, mu=self.mu, strategy=self.strategy, moves=self.moves)
        box = Box.cube(hw, h, g.dim, self.extend)
        psi, ff = initial_datum(self.datum, **(self.datum_params or {}))
        diag = StepDiagnostics()
        self.layers_ = solve(cfg, op, psi, box, g, ff, diagnostics=diag)
        self.config_ = cfg
        self.group_ = g
        self.diagnostics_ = diag.as_dict()
        self.n_features_in_ = g.dim
        return self

    def predict(self, X, t=None):
        """u(t, x) for each row of ``X``; ``t`` defaults to the final time."""
        check_is_fitted(self, "layers_")
        X = check_points(X, self.n_features_in_)
        t = self.config_.T if t is None else check_time(t, self.config_.T)
        layer = self.layers_[self.config_.layer_index(t)]
        return np.asarray(sample(layer, X), dtype=float)

    def zero_level_radius(self, t=None, center=None, n_rays=32):
        check_is_fitted(self, "layers_")
        t = self.config_.T if t is None else check_time(t, self.config_.T)
        return measure_zero_level_radius(self.layers_[self.config_.layer_index(t)], center, n_rays)
