"""Empirical value-of-computation layer.

A polynomial surface in (current value, heuristic value) is fit by least
squares to predict the optimal value, one training point per profile.  The
prediction feeds the latent value of refinement, which a controller weighs
against a per-step cost model to decide when further refinement stops
paying off.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .diagram import DiagramError, InfluenceDiagram
from .refinement import RefinementEngine, RefinementProfile

# Monomial exponents (i, j) for x^i * y^j with x = current EV, y = H.
_BASIS = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
]

TRACE_COLUMNS = [
    "step",
    "ev_i",
    "ev_star_hat",
    "n_refinable",
    "lvr",
    "inc_cost",
    "diff_value",
    "cum_cost",
    "ev_ii",
]


def basis_exponents(degree: int) -> list[tuple[int, int]]:
    if degree not in (1, 2, 3):
        raise DiagramError("degree must be 1, 2 or 3")
    return [e for e in _BASIS if e[0] + e[1] <= degree]


@dataclass(frozen=True)
class TrainingPoint:
    ev_i: float
    h: float
    ev_star: float
    diagram_id: str = ""
    step: int = 0


def extract_training_point(profile: RefinementProfile, step: int = 10) -> TrainingPoint:
    """One (EV, H) -> EV* point from the record at the given step."""
    if profile.ev_star is None:
        raise DiagramError(f"profile {profile.diagram_id!r} has no known optimum")
    if len(profile.steps) <= step:
        raise DiagramError(
            f"profile {profile.diagram_id!r} too short: {len(profile.steps) - 1} "
            f"steps, need {step}"
        )
    rec = profile.steps[step]
    return TrainingPoint(
        ev_i=rec.ev_i,
        h=rec.h,
        ev_star=profile.ev_star,
        diagram_id=profile.diagram_id,
        step=step,
    )


@dataclass(frozen=True)
class MetaModel:
    """Fitted polynomial surface predicting the optimal value."""

    degree: int
    coefficients: tuple[float, ...]
    sse: float = 0.0
    n_points: int = 0
    provenance: str = ""

    def __post_init__(self):
        if len(self.coefficients) != len(basis_exponents(self.degree)):
            raise DiagramError(
                f"degree {self.degree} needs {len(basis_exponents(self.degree))} "
                f"coefficients, got {len(self.coefficients)}"
            )

    def predict(self, ev_i: float, h: float, clamp: bool = False) -> float:
        out = sum(
            c * ev_i ** i * h ** j
            for c, (i, j) in zip(self.coefficients, basis_exponents(self.degree))
        )
        if clamp:
            out = min(1.0, max(0.0, out))
        return out

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "coefficients": list(self.coefficients),
            "sse": self.sse,
            "n_points": self.n_points,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MetaModel":
        return cls(
            degree=int(obj["degree"]),
            coefficients=tuple(float(c) for c in obj["coefficients"]),
            sse=float(obj.get("sse", 0.0)),
            n_points=int(obj.get("n_points", 0)),
            provenance=obj.get("provenance", ""),
        )


def design_matrix(points: Sequence[tuple[float, float]], degree: int) -> np.ndarray:
    exps = basis_exponents(degree)
    return np.array([[x ** i * y ** j for i, j in exps] for x, y in points])


def fit_polynomial(points: Sequence[TrainingPoint], degree: int = 1) -> MetaModel:
    """Ordinary least squares over the monomial basis (QR/SVD, not normal
    equations); raises on rank-deficient designs."""
    exps = basis_exponents(degree)
    if len(points) <= len(exps):
        raise DiagramError(
            f"need more than {len(exps)} points for degree {degree}, got {len(points)}"
        )
    X = design_matrix([(p.ev_i, p.h) for p in points], degree)
    y = np.array([p.ev_star for p in points])
    if np.linalg.matrix_rank(X) < len(exps):
        raise DiagramError("design matrix is rank deficient")
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    sse = float(((X @ coef - y) ** 2).sum())
    return MetaModel(
        degree=degree,
        coefficients=tuple(float(c) for c in coef),
        sse=sse,
        n_points=len(points),
    )


def predict_ev_star(model: MetaModel, ev_i: float, h: float, clamp: bool = False) -> float:
    return model.predict(ev_i, h, clamp=clamp)


def extrapolation_report(
    model: MetaModel, grid_points: int = 21
) -> dict:
    """Probe predictions on a [0,1]^2 grid and flag values outside [0, 1]."""
    xs = np.linspace(0.0, 1.0, grid_points)
    flagged = []
    for x in xs:
        for y in xs:
            pred = model.predict(float(x), float(y))
            if pred < 0.0 or pred > 1.0:
                flagged.append({"ev_i": float(x), "h": float(y), "prediction": pred})
    return {
        "degree": model.degree,
        "probed": grid_points * grid_points,
        "out_of_range": len(flagged),
        "flagged": flagged,
    }


# ---------------------------------------------------------------------------
# Cost models


@dataclass(frozen=True)
class CostModel:
    """Cumulative cost c(t) of t refinement steps; c(0) = 0.

    kinds: ``zero``; ``linear`` with c(t) = rate * t; ``exponential`` with
    c(t) = a * (r^t - 1), a > 0, r > 1.
    """

    kind: str
    rate: float = 0.0
    a: float = 0.0
    r: float = 1.0

    def __post_init__(self):
        if self.kind not in ("zero", "linear", "exponential"):
            raise DiagramError(f"unknown cost model kind {self.kind!r}")
        if self.kind == "exponential" and (self.a <= 0 or self.r <= 1):
            raise DiagramError("exponential cost needs a > 0 and r > 1")
        if self.kind == "linear" and self.rate < 0:
            raise DiagramError("linear cost needs rate >= 0")

    def cumulative(self, t: int) -> float:
        if t < 0:
            raise DiagramError("t must be >= 0")
        if self.kind == "zero":
            return 0.0
        if self.kind == "linear":
            return self.rate * t
        return self.a * (self.r ** t - 1.0)

    @classmethod
    def parse(cls, text: str) -> "CostModel":
        """Parse ``zero``, ``linear:RATE`` or ``exp:A,R``."""
        kind, _, params = text.partition(":")
        if kind == "zero":
            return cls("zero")
        if kind == "linear":
            return cls("linear", rate=float(params))
        if kind in ("exp", "exponential"):
            a, r = (float(x) for x in params.split(","))
            return cls("exponential", a=a, r=r)
        raise DiagramError(f"cannot parse cost model {text!r}")


def step_cost(cost: CostModel, t: int) -> tuple[float, float]:
    """(cumulative cost at t, incremental cost of step t)."""
    cum = cost.cumulative(t)
    inc = cum - cost.cumulative(t - 1) if t > 0 else 0.0
    return cum, inc


def latent_value(
    ev_star_est: float, ev_i: float, n_refinable: int
) -> tuple[float, bool]:
    """Optimality-gap estimate spread uniformly over refinable contexts.

    Returns (value, converged); converged is set when nothing is refinable,
    in which case the value is 0.  The value may be negative.
    """
    if n_refinable < 0:
        raise DiagramError("n_refinable must be >= 0")
    if n_refinable == 0:
        return 0.0, True
    return (ev_star_est - ev_i) / n_refinable, False


# ---------------------------------------------------------------------------
# Controller


@dataclass(frozen=True)
class ControllerRow:
    step: int
    ev_i: float
    ev_star_hat: float
    n_refinable: int
    lvr: float
    inc_cost: float
    diff_value: float
    cum_cost: float
    ev_ii: float


@dataclass
class ControllerTrace:
    rows: list[ControllerRow]
    stop_step: int
    stop_reason: str  # "negative-differential", "converged", "budget"

    @property
    def argmax_ev_ii_step(self) -> int:
        """Retrospective comprehensive-value maximum (earliest on ties)."""
        best = max(r.ev_ii for r in self.rows)
        for r in self.rows:
            if r.ev_ii == best:
                return r.step
        raise AssertionError

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.rows:
            w.writerow(
                [
                    r.step,
                    repr(r.ev_i),
                    repr(r.ev_star_hat),
                    r.n_refinable,
                    repr(r.lvr),
                    repr(r.inc_cost),
                    repr(r.diff_value),
                    repr(r.cum_cost),
                    repr(r.ev_ii),
                ]
            )
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "stop_step": self.stop_step,
            "stop_reason": self.stop_reason,
            "ev_ii_argmax_step": self.argmax_ev_ii_step,
            "stop_lag": self.stop_step - self.argmax_ev_ii_step,
            "final_ev_i": self.rows[-1].ev_i,
            "final_ev_ii": self.rows[-1].ev_ii,
        }


def run_controller(
    diagram: InfluenceDiagram,
    model: MetaModel,
    cost: CostModel,
    max_steps: int,
    clamp: bool = False,
) -> ControllerTrace:
    """Refine while the predicted differential value stays positive.

    Before each step the surface predicts the optimal value from the current
    EV and the heuristic of the context that would be refined next; the step
    is taken only if latent value per refinement exceeds its incremental
    cost.  The trace keeps the full retrospective series.
    """
    engine = RefinementEngine(diagram)
    rows: list[ControllerRow] = []
    t = 0
    while True:
        choice = engine.peek()
        n = engine.n_refinable
        h = choice.h if choice is not None else 0.0
        pred = model.predict(engine.ev, h, clamp=clamp)
        lvr, converged = latent_value(pred, engine.ev, n)
        cum, _ = step_cost(cost, t)
        _, inc_next = step_cost(cost, t + 1)
        diff = lvr - inc_next
        rows.append(
            ControllerRow(
                step=t,
                ev_i=engine.ev,
                ev_star_hat=pred,
                n_refinable=n,
                lvr=lvr,
                inc_cost=inc_next,
                diff_value=diff,
                cum_cost=cum,
                ev_ii=engine.ev - cum,
            )
        )
        if converged:
            return ControllerTrace(rows, stop_step=t, stop_reason="converged")
        if diff <= 0.0:
            return ControllerTrace(rows, stop_step=t, stop_reason="negative-differential")
        if t >= max_steps:
            return ControllerTrace(rows, stop_step=t, stop_reason="budget")
        engine.step()
        t += 1


def comprehensive_profile(
    profile: RefinementProfile, cost: CostModel
) -> tuple[list[float], int]:
    """EV minus cumulative cost per recorded step, plus the argmax step."""
    ev_ii = [s.ev_i - cost.cumulative(s.step) for s in profile.steps]
    best = max(ev_ii)
    return ev_ii, ev_ii.index(best)
