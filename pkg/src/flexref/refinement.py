"""Anytime policy construction by information refinement.

The engine grows one decision tree per decision node, one leaf split at a
time.  Leaves are ranked by the second-best-action heuristic H = p * v / v*;
the split variable at the chosen leaf is the unused informational
predecessor that maximizes the post-split expected value.  Every step is
recorded in a profile.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field, replace
from typing import Optional

from .diagram import (
    Context,
    DiagramError,
    EMPTY_CONTEXT,
    InfluenceDiagram,
    Policy,
    PolicyLeaf,
    PolicyNode,
    PolicySplit,
    PolicyTree,
)
from .inference import (
    ActionValuation,
    action_valuation,
    eval_policy,
    full_information_bound,
    restricted_value_root,
)

PROFILE_COLUMNS = [
    "step",
    "ev_i",
    "h",
    "n_refinable",
    "decision",
    "split_var",
    "delta_ev",
    "wall_ms",
]


def heuristic_H(valuation: ActionValuation) -> float:
    """Second-best-action heuristic p * v / v*.

    Degenerate cases: 0 when the context is impossible, and p when the two
    best actions tie or the best action is worthless (ratio taken as 1).
    """
    if valuation.p == 0.0:
        return 0.0
    if valuation.v_star == 0.0 or valuation.v == valuation.v_star:
        return valuation.p
    return valuation.p * valuation.v / valuation.v_star


@dataclass(frozen=True)
class RefinementStep:
    """One recorded step; step 0 describes the initial policy."""

    step: int
    ev_i: float
    h: float
    n_refinable: int
    decision: Optional[str] = None
    context: Optional[Context] = None
    split_var: Optional[str] = None
    delta_ev: float = 0.0
    wall_ms: float = 0.0


@dataclass
class RefinementProfile:
    diagram_id: str
    seed: Optional[int]
    steps: list[RefinementStep]
    ev_star: Optional[float] = None
    final_policy: Optional[Policy] = None
    stop_reason: str = ""

    def ev_series(self) -> list[float]:
        return [s.ev_i for s in self.steps]

    @property
    def final_ev(self) -> float:
        return self.steps[-1].ev_i

    def convergence_step(self, ev_star: Optional[float] = None, tol: float = 1e-9) -> Optional[int]:
        """First step index at which EV is within ``tol`` of the optimum."""
        target = self.ev_star if ev_star is None else ev_star
        if target is None:
            return None
        for s in self.steps:
            if s.ev_i >= target - tol:
                return s.step
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for s in self.steps:
            w.writerow(
                [
                    s.step,
                    repr(s.ev_i),
                    repr(s.h),
                    s.n_refinable,
                    s.decision or "",
                    s.split_var or "",
                    repr(s.delta_ev),
                    repr(s.wall_ms),
                ]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(
        cls,
        text: str,
        diagram_id: str = "",
        seed: Optional[int] = None,
        ev_star: Optional[float] = None,
    ) -> "RefinementProfile":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != PROFILE_COLUMNS:
            raise DiagramError("profile CSV has unexpected header")
        steps = [
            RefinementStep(
                step=int(r[0]),
                ev_i=float(r[1]),
                h=float(r[2]),
                n_refinable=int(r[3]),
                decision=r[4] or None,
                split_var=r[5] or None,
                delta_ev=float(r[6]),
                wall_ms=float(r[7]),
            )
            for r in rows[1:]
        ]
        return cls(diagram_id=diagram_id, seed=seed, steps=steps, ev_star=ev_star)


@dataclass
class _LeafRecord:
    decision: str
    path: tuple[tuple[str, int], ...]  # root-to-leaf order
    context: Context
    valuation: ActionValuation
    h: float
    action: int
    order: int  # leaf creation order, for tie-breaking

    def unused(self, diagram: InfluenceDiagram) -> tuple[str, ...]:
        used = {v for v, _ in self.path}
        return tuple(v for v in diagram.info_set(self.decision) if v not in used)


class RefinementEngine:
    """Stateful driver for one refinement run.

    Holds the current policy, its exact expected value, and a cached
    valuation per leaf.  ``step()`` performs one refinement; callers that
    need the stopping decision before each step use ``peek()``.
    """

    def __init__(self, diagram: InfluenceDiagram, policy: Optional[Policy] = None):
        self.diagram = diagram
        self._counter = 0
        if policy is None:
            policy = initial_policy(diagram)
        self.policy = policy
        self._records: list[_LeafRecord] = []
        for d in diagram.stage_order:
            self._collect(d, self.policy.tree(d).root, ())
        self.ev = eval_policy(diagram, self.policy)
        self._multistage = len(diagram.stage_order) > 1

    def _collect(self, decision: str, node: PolicyNode, path) -> None:
        if isinstance(node, PolicyLeaf):
            ctx = Context(path)
            val = action_valuation(self.diagram, self.policy, decision, ctx)
            self._records.append(
                _LeafRecord(
                    decision=decision,
                    path=tuple(path),
                    context=ctx,
                    valuation=val,
                    h=heuristic_H(val),
                    action=node.action,
                    order=self._counter,
                )
            )
            self._counter += 1
        else:
            for s, child in enumerate(node.children):
                self._collect(decision, child, path + ((node.var, s),))

    # -- queries ----------------------------------------------------------

    def refinable(self) -> list[_LeafRecord]:
        return [r for r in self._records if r.unused(self.diagram)]

    @property
    def n_refinable(self) -> int:
        return len(self.refinable())

    def _can_still_gain(self, rec: _LeafRecord) -> bool:
        # Full-information bound within the leaf region; a leaf whose bound
        # already equals its value can never improve, so refining it first
        # would only burn steps.  Only decidable cheaply for single-stage.
        if rec.valuation.p <= 0.0:
            return False
        bound = full_information_bound(self.diagram, rec.decision, rec.context)
        if bound is None:
            return True
        gap = bound - rec.valuation.values[rec.action]
        return rec.valuation.p * gap > 1e-12

    def peek(self) -> Optional[_LeafRecord]:
        """The leaf the next step would refine, or None when exhausted.

        Leaves ranked by H; leaves that provably cannot improve are held
        back until no improvable leaf remains.
        """
        candidates = self.refinable()
        if not candidates:
            return None
        pool = [r for r in candidates if self._can_still_gain(r)] or candidates
        return min(
            pool,
            key=lambda r: (-r.h, self.diagram.stage_index(r.decision), r.order),
        )

    # -- refinement -------------------------------------------------------

    def step(self) -> RefinementStep:
        t0 = time.perf_counter()
        rec = self.peek()
        if rec is None:
            raise DiagramError("no refinable contexts remain")
        n_before = self.n_refinable
        h = rec.h
        split_var, delta = self._refine(rec)
        return RefinementStep(
            step=-1,  # caller assigns the index
            ev_i=self.ev,
            h=h,
            n_refinable=n_before,
            decision=rec.decision,
            context=rec.context,
            split_var=split_var,
            delta_ev=delta,
            wall_ms=(time.perf_counter() - t0) * 1e3,
        )

    def refine_at(self, decision: str, context: Context) -> tuple[str, float]:
        """Refine a specific leaf (used by the functional API)."""
        for rec in self._records:
            if rec.decision == decision and rec.context == context:
                if not rec.unused(self.diagram):
                    raise DiagramError("leaf has no unused informational predecessors")
                return self._refine(rec)
        raise DiagramError("no such leaf context in the current policy")

    def _refine(self, rec: _LeafRecord) -> tuple[str, float]:
        diagram = self.diagram
        unused = rec.unused(diagram)
        # All value dependence below this context flows through the first
        # unassigned split of the value tree; taking it keeps the policy
        # tree aligned with the value structure and avoids splits that can
        # never matter.  When it is not an available predecessor, fall back
        # to the split maximizing the post-split expected value.
        aligned = restricted_value_root(diagram, rec.decision, rec.context)
        candidates = (aligned,) if aligned in unused else unused
        best_var = None
        best_contrib = None
        best_vals: list[ActionValuation] = []
        for var in candidates:
            vals = []
            contrib = 0.0
            for s in range(diagram.var(var).arity):
                v = action_valuation(
                    diagram, self.policy, rec.decision, rec.context.with_(var, s)
                )
                vals.append(v)
                contrib += v.p * v.v_star
            if best_contrib is None or contrib > best_contrib:
                best_var, best_contrib, best_vals = var, contrib, vals

        old_contrib = rec.valuation.p * rec.valuation.values[rec.action]
        delta = best_contrib - old_contrib

        children = tuple(
            PolicyLeaf(v.best_action, p=v.p, v_star=v.v_star, v=v.v) for v in best_vals
        )
        new_root = _replace_leaf(
            self.policy.tree(rec.decision).root, rec.path, PolicySplit(best_var, children)
        )
        self.policy = self.policy.with_tree(PolicyTree(rec.decision, new_root))
        self._records.remove(rec)
        for s, v in enumerate(best_vals):
            self._records.append(
                _LeafRecord(
                    decision=rec.decision,
                    path=rec.path + ((best_var, s),),
                    context=rec.context.with_(best_var, s),
                    valuation=v,
                    h=heuristic_H(v),
                    action=v.best_action,
                    order=self._counter,
                )
            )
            self._counter += 1
        self.ev += delta
        if self._multistage:
            self._refresh_other_trees(rec.decision)
        return best_var, delta

    def _refresh_other_trees(self, refined_decision: str) -> None:
        # A refinement changes the policy inside the refined region, which
        # can shift p and the action values for every other tree's leaves.
        for rec in self._records:
            if rec.decision == refined_decision:
                continue
            val = action_valuation(self.diagram, self.policy, rec.decision, rec.context)
            rec.valuation = val
            rec.h = heuristic_H(val)
        self.policy = Policy(
            {
                d: PolicyTree(d, self._with_stats(d, self.policy.tree(d).root, ()))
                for d in self.policy.trees
            }
        )

    def _with_stats(self, decision: str, node: PolicyNode, path) -> PolicyNode:
        if isinstance(node, PolicyLeaf):
            ctx = Context(path)
            for rec in self._records:
                if rec.decision == decision and rec.context == ctx:
                    return PolicyLeaf(
                        node.action,
                        p=rec.valuation.p,
                        v_star=rec.valuation.v_star,
                        v=rec.valuation.v,
                    )
            return node
        return PolicySplit(
            node.var,
            tuple(
                self._with_stats(decision, c, path + ((node.var, s),))
                for s, c in enumerate(node.children)
            ),
        )


def _replace_leaf(
    root: PolicyNode, path: tuple[tuple[str, int], ...], replacement: PolicyNode
) -> PolicyNode:
    if not path:
        if not isinstance(root, PolicyLeaf):
            raise DiagramError("path does not end at a leaf")
        return replacement
    (var, state), rest = path[0], path[1:]
    if not isinstance(root, PolicySplit) or root.var != var:
        raise DiagramError("path does not match tree structure")
    children = list(root.children)
    children[state] = _replace_leaf(children[state], rest, replacement)
    return PolicySplit(var, tuple(children))


# ---------------------------------------------------------------------------
# Functional API


def initial_policy(diagram: InfluenceDiagram) -> Policy:
    """Root-leaf policy: each decision takes its best unconditional action.

    Decisions are assigned in stage order, each seeing the actions already
    chosen for earlier stages (later stages start at action 0).
    """
    policy = Policy(
        {d: PolicyTree(d, PolicyLeaf(0)) for d in diagram.stage_order}
    )
    for d in diagram.stage_order:
        val = action_valuation(diagram, policy, d, EMPTY_CONTEXT)
        policy = policy.with_tree(
            PolicyTree(
                d, PolicyLeaf(val.best_action, p=val.p, v_star=val.v_star, v=val.v)
            )
        )
    return policy


def refinable_contexts(
    diagram: InfluenceDiagram, policy: Policy
) -> list[tuple[str, Context, float]]:
    """All refinable leaf contexts with their heuristic values."""
    engine = RefinementEngine(diagram, policy)
    return [(r.decision, r.context, r.h) for r in engine.refinable()]


def refine_leaf(
    diagram: InfluenceDiagram, policy: Policy, decision: str, context: Context
) -> tuple[Policy, str, float]:
    """Split one leaf on its best unused predecessor; returns the new policy."""
    engine = RefinementEngine(diagram, policy)
    split_var, delta = engine.refine_at(decision, context)
    return engine.policy, split_var, delta


def run_refinement(
    diagram: InfluenceDiagram,
    max_steps: Optional[int] = None,
    target_value: Optional[float] = None,
    target_tol: float = 1e-9,
) -> RefinementProfile:
    """Run refinement to a step budget, a target value, or exhaustion.

    The profile's step 0 records the initial policy (its H column holds the
    heuristic of the context the first step would refine).
    """
    engine = RefinementEngine(diagram)
    first = engine.peek()
    steps = [
        RefinementStep(
            step=0,
            ev_i=engine.ev,
            h=first.h if first is not None else 0.0,
            n_refinable=engine.n_refinable,
        )
    ]
    reason = ""
    while True:
        if target_value is not None and engine.ev >= target_value - target_tol:
            reason = "target"
            break
        if max_steps is not None and len(steps) - 1 >= max_steps:
            reason = "budget"
            break
        if engine.peek() is None:
            reason = "exhausted"
            break
        rec = engine.step()
        steps.append(replace(rec, step=len(steps)))
    return RefinementProfile(
        diagram_id=str(diagram.meta.get("id", "")),
        seed=diagram.meta.get("seed"),
        steps=steps,
        final_policy=engine.policy,
        stop_reason=reason,
    )
