"""Estimator-style wrappers around the functional core.

These follow the fit/predict idiom so the pieces compose with the usual
tooling: ``PolynomialSurface`` is a plain regressor over (ev_i, h) pairs,
``InformationRefinement`` fits a policy to a diagram, and
``RefinementController`` fits a cost-aware run.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .diagram import InfluenceDiagram
from .metamodel import (
    CostModel,
    MetaModel,
    TrainingPoint,
    fit_polynomial,
    run_controller,
)
from .refinement import run_refinement


class InformationRefinement(BaseEstimator):
    """Anytime policy construction for one influence diagram.

    Parameters
    ----------
    max_steps : refinement budget, or None to run to exhaustion.
    target_value : stop once the policy value reaches this (e.g. a known
        optimum), within ``target_tol``.
    """

    def __init__(self, max_steps: Optional[int] = None,
                 target_value: Optional[float] = None, target_tol: float = 1e-9):
        self.max_steps = max_steps
        self.target_value = target_value
        self.target_tol = target_tol

    def fit(self, diagram: InfluenceDiagram, y=None):
        profile = run_refinement(
            diagram,
            max_steps=self.max_steps,
            target_value=self.target_value,
            target_tol=self.target_tol,
        )
        self.profile_ = profile
        self.policy_ = profile.final_policy
        self.ev_ = profile.final_ev
        self.n_steps_ = len(profile.steps) - 1
        return self


class PolynomialSurface(RegressorMixin, BaseEstimator):
    """Least-squares polynomial surface z = f(ev_i, h), degree 1 to 3."""

    def __init__(self, degree: int = 1, clamp: bool = False):
        self.degree = degree
        self.clamp = clamp

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or X.shape[1] != 2:
            raise ValueError("X must be an (n_samples, 2) array of (ev_i, h)")
        points = [
            TrainingPoint(ev_i=float(a), h=float(b), ev_star=float(t))
            for (a, b), t in zip(X, y)
        ]
        self.model_ = fit_polynomial(points, degree=self.degree)
        self.coef_ = np.array(self.model_.coefficients)
        self.sse_ = self.model_.sse
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise NotFittedError("PolynomialSurface is not fitted")
        X = np.asarray(X, dtype=float)
        return np.array(
            [self.model_.predict(float(a), float(b), clamp=self.clamp) for a, b in X]
        )


class RefinementController(BaseEstimator):
    """Cost-aware refinement: stop when marginal value drops below cost."""

    def __init__(self, model: Optional[MetaModel] = None, cost: str = "zero",
                 max_steps: int = 30, clamp: bool = False):
        self.model = model
        self.cost = cost
        self.max_steps = max_steps
        self.clamp = clamp

    def fit(self, diagram: InfluenceDiagram, y=None):
        if self.model is None:
            raise ValueError("RefinementController needs a fitted MetaModel")
        cost = self.cost if isinstance(self.cost, CostModel) else CostModel.parse(self.cost)
        self.trace_ = run_controller(
            diagram, self.model, cost, max_steps=self.max_steps, clamp=self.clamp
        )
        self.stop_step_ = self.trace_.stop_step
        self.stop_reason_ = self.trace_.stop_reason
        return self
