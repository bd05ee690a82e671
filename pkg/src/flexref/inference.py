"""Exact probabilistic computation on influence diagrams.

Fixed tree policies are evaluated by converting each decision node into a
deterministic chance node over its tree's split variables and running
variable elimination with a min-fill ordering.  Diagrams from the
single-decision family (one decision, parentless chance nodes) take a fast
path that walks the value tree directly instead of building factors.

All functions here are pure; identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .diagram import (
    CHANCE,
    DECISION,
    Context,
    DiagramError,
    EMPTY_CONTEXT,
    InfluenceDiagram,
    Policy,
    PolicyLeaf,
    PolicyNode,
    PolicySplit,
    PolicyTree,
    ValueLeaf,
    ValueSplit,
    ValueNode,
    eval_value_tree,
    policy_action,
    value_tree_vars,
)

DEFAULT_SOLVE_CAP = 2 ** 20


class SolveCapExceeded(DiagramError):
    """The instance is too large for the exact solver's configured cap."""


@dataclass(frozen=True)
class Factor:
    """A real-valued table over an ordered scope of variables."""

    scope: tuple[str, ...]
    table: np.ndarray  # one axis per scope variable

    def __post_init__(self):
        assert self.table.ndim == len(self.scope)


@dataclass(frozen=True)
class ActionValuation:
    """Per-action expected values for one decision in one context."""

    context: Context
    values: tuple[float, ...]
    p: float
    v_star: float
    v: float
    best_action: int


@dataclass(frozen=True)
class SolveResult:
    """Optimal expected value plus an achieving full-information policy.

    Single-stage instances carry a fully split ``policy``; multistage
    instances carry an ``action_table`` keyed by observation/decision
    history instead.
    """

    ev_star: float
    policy: Optional[Policy] = None
    action_table: Optional[dict] = None


# ---------------------------------------------------------------------------
# Factor algebra


def _multiply(a: Factor, b: Factor) -> Factor:
    scope = a.scope + tuple(v for v in b.scope if v not in a.scope)
    ta = a.table.reshape(a.table.shape + (1,) * (len(scope) - len(a.scope)))
    # Align b's axes to the joint scope by transpose-then-reshape.
    shape_b = [b.table.shape[b.scope.index(v)] if v in b.scope else 1 for v in scope]
    order = [b.scope.index(v) for v in scope if v in b.scope]
    tb = b.table.transpose(order).reshape(shape_b)
    return Factor(scope, ta * tb)


def _sum_out(f: Factor, var: str) -> Factor:
    i = f.scope.index(var)
    return Factor(f.scope[:i] + f.scope[i + 1 :], f.table.sum(axis=i))


def _reduce(f: Factor, evidence: Mapping[str, int]) -> Factor:
    idx = []
    scope = []
    for v in f.scope:
        if v in evidence:
            idx.append(evidence[v])
        else:
            idx.append(slice(None))
            scope.append(v)
    return Factor(tuple(scope), f.table[tuple(idx)])


def _min_fill_order(scopes: list[tuple[str, ...]], eliminate: set[str]) -> list[str]:
    adj: dict[str, set[str]] = {}
    for scope in scopes:
        for v in scope:
            adj.setdefault(v, set()).update(x for x in scope if x != v)
    order = []
    remaining = set(eliminate) & set(adj)
    while remaining:
        best = None
        best_fill = None
        for v in sorted(remaining):
            nbrs = [n for n in adj[v] if n in adj]
            fill = sum(
                1
                for a, b in itertools.combinations(nbrs, 2)
                if b not in adj[a]
            )
            if best_fill is None or fill < best_fill:
                best, best_fill = v, fill
        nbrs = [n for n in adj[best] if n in adj]
        for a, b in itertools.combinations(nbrs, 2):
            adj[a].add(b)
            adj[b].add(a)
        for n in nbrs:
            adj[n].discard(best)
        del adj[best]
        remaining.discard(best)
        order.append(best)
    return order


def _eliminate(factors: list[Factor], evidence: Mapping[str, int], keep: tuple[str, ...]) -> Factor:
    """Sum out everything except ``keep`` from the product of ``factors``."""
    reduced = [_reduce(f, evidence) for f in factors]
    reduced = [f for f in reduced if f.scope or f.table.size]
    all_vars = set().union(*(set(f.scope) for f in reduced)) if reduced else set()
    order = _min_fill_order([f.scope for f in reduced], all_vars - set(keep))
    for var in order:
        related = [f for f in reduced if var in f.scope]
        rest = [f for f in reduced if var not in f.scope]
        prod = related[0]
        for f in related[1:]:
            prod = _multiply(prod, f)
        reduced = rest + [_sum_out(prod, var)]
    result = Factor((), np.array(1.0))
    for f in reduced:
        result = _multiply(result, f)
    if tuple(result.scope) != tuple(keep):
        order = [result.scope.index(v) for v in keep]
        result = Factor(tuple(keep), result.table.transpose(order))
    return result


# ---------------------------------------------------------------------------
# Network construction


def _chance_factors(diagram: InfluenceDiagram) -> list[Factor]:
    factors = []
    for v in diagram.chance_vars:
        parents = diagram.parents_of(v.id)
        shape = tuple(diagram.var(p).arity for p in parents) + (v.arity,)
        table = np.array(diagram.cpts[v.id], dtype=float).reshape(shape)
        factors.append(Factor(parents + (v.id,), table))
    return factors


def policy_tree_factor(diagram: InfluenceDiagram, tree: PolicyTree) -> Factor:
    """Deterministic CPT induced by a policy tree over its split variables."""
    split_vars = sorted(
        {v for v in _collect_splits(tree.root)},
        key=lambda v: diagram.info_set(tree.decision).index(v),
    )
    arity = diagram.var(tree.decision).arity
    shape = tuple(diagram.var(v).arity for v in split_vars) + (arity,)
    table = np.zeros(shape)
    for combo in itertools.product(*(range(diagram.var(v).arity) for v in split_vars)):
        a = policy_action(tree, dict(zip(split_vars, combo)))
        table[combo + (a,)] = 1.0
    return Factor(tuple(split_vars) + (tree.decision,), table)


def _collect_splits(node: PolicyNode) -> set[str]:
    out: set[str] = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, PolicySplit):
            out.add(n.var)
            stack.extend(n.children)
    return out


def value_factor(diagram: InfluenceDiagram) -> Factor:
    scope = tuple(sorted(value_tree_vars(diagram.value_tree)))
    shape = tuple(diagram.var(v).arity for v in scope)
    table = np.empty(shape)
    for combo in itertools.product(*(range(a) for a in shape)):
        table[combo] = eval_value_tree(diagram.value_tree, dict(zip(scope, combo)))
    return Factor(scope, table)


def _is_simple_single_stage(diagram: InfluenceDiagram) -> bool:
    return len(diagram.stage_order) == 1 and all(
        not diagram.parents_of(v.id) for v in diagram.chance_vars
    )


# ---------------------------------------------------------------------------
# Fast path: one decision, independent chance nodes


def _prior(diagram: InfluenceDiagram, var_id: str) -> tuple[float, ...]:
    return diagram.cpts[var_id][0]


def _fast_context_probability(diagram: InfluenceDiagram, context: Context) -> float:
    p = 1.0
    for var, state in context.items:
        if diagram.var(var).kind != CHANCE:
            raise DiagramError(f"context assigns non-chance variable {var!r}")
        p *= _prior(diagram, var)[state]
    return p


def _fast_expectation(
    diagram: InfluenceDiagram, node: ValueNode, assignment: dict[str, int]
) -> float:
    """E[value tree | assignment], marginalizing unassigned chance variables."""
    if isinstance(node, ValueLeaf):
        return node.value
    state = assignment.get(node.var)
    if state is not None:
        return _fast_expectation(diagram, node.children[state], assignment)
    prior = _prior(diagram, node.var)
    return sum(
        prior[s] * _fast_expectation(diagram, child, assignment)
        for s, child in enumerate(node.children)
    )


def full_information_bound(
    diagram: InfluenceDiagram, decision: str, context: Context
) -> Optional[float]:
    """E[max-action value | context] for single-decision diagrams.

    Upper-bounds what any refinement below this context can achieve; None
    when the diagram is outside the fast single-stage family.
    """
    if not _is_simple_single_stage(diagram):
        return None

    def walk(node: ValueNode) -> float:
        if isinstance(node, ValueLeaf):
            return node.value
        state = context.get(node.var)
        if state is not None:
            return walk(node.children[state])
        if node.var == decision:
            return max(walk(c) for c in node.children)
        prior = _prior(diagram, node.var)
        return sum(prior[s] * walk(c) for s, c in enumerate(node.children))

    return walk(diagram.value_tree)


def restricted_value_root(
    diagram: InfluenceDiagram, decision: str, context: Context
) -> Optional[str]:
    """First unassigned non-decision split of the value tree under context."""
    node = diagram.value_tree
    while isinstance(node, ValueSplit):
        state = context.get(node.var)
        if state is not None:
            node = node.children[state]
            continue
        return None if node.var == decision else node.var
    return None


# ---------------------------------------------------------------------------
# Public operations


def context_probability(
    diagram: InfluenceDiagram, policy: Optional[Policy], context: Context
) -> float:
    """Exact marginal probability of a context under fixed upstream policy."""
    for var, _ in context.items:
        diagram.var(var)
    if not context.items:
        return 1.0
    if _is_simple_single_stage(diagram) and all(
        diagram.var(v).kind == CHANCE for v in context.vars()
    ):
        return _fast_context_probability(diagram, context)
    factors = _chance_factors(diagram)
    if policy is not None:
        # decisions assigned in the context keep their policy factor too, so
        # the probability counts only trajectories the policy actually takes
        for d in diagram.stage_order:
            if d in policy.trees:
                factors.append(policy_tree_factor(diagram, policy.tree(d)))
    result = _eliminate(factors, context.as_dict(), ())
    return float(result.table)


def action_valuation(
    diagram: InfluenceDiagram,
    policy: Optional[Policy],
    decision: str,
    context: Context,
) -> ActionValuation:
    """p, per-action expected values, v* and v for one decision context.

    All decisions other than ``decision`` follow ``policy``; zero-probability
    contexts get all-zero action values by convention.
    """
    arity = diagram.var(decision).arity
    p = context_probability(diagram, policy, context)
    if p <= 0.0:
        return ActionValuation(context, (0.0,) * arity, 0.0, 0.0, 0.0, 0)

    if _is_simple_single_stage(diagram):
        assignment = context.as_dict()
        values = []
        for a in range(arity):
            assignment[decision] = a
            values.append(_fast_expectation(diagram, diagram.value_tree, assignment))
        del assignment[decision]
    else:
        factors = _chance_factors(diagram)
        for d in diagram.stage_order:
            if d != decision and policy is not None and d in policy.trees:
                factors.append(policy_tree_factor(diagram, policy.tree(d)))
        factors.append(value_factor(diagram))
        g = _eliminate(factors, context.as_dict(), (decision,))
        values = [float(x) / p for x in g.table]

    values = tuple(values)
    best = max(range(arity), key=lambda a: (values[a], -a))
    v_star = values[best]
    v = sorted(values, reverse=True)[1]
    return ActionValuation(context, values, p, v_star, v, best)


def eval_policy(diagram: InfluenceDiagram, policy: Policy) -> float:
    """Exact expected value of the diagram under a fixed tree policy."""
    for d in diagram.stage_order:
        policy.tree(d)
    if _is_simple_single_stage(diagram):
        d = diagram.stage_order[0]
        total = 0.0
        for _, ctx, leaf in _tree_leaves(policy.tree(d)):
            p = _fast_context_probability(diagram, ctx)
            if p == 0.0:
                continue
            assignment = ctx.as_dict()
            assignment[d] = leaf.action
            total += p * _fast_expectation(diagram, diagram.value_tree, assignment)
        return total
    factors = _chance_factors(diagram)
    for d in diagram.stage_order:
        factors.append(policy_tree_factor(diagram, policy.tree(d)))
    factors.append(value_factor(diagram))
    return float(_eliminate(factors, {}, ()).table)


def _tree_leaves(tree: PolicyTree):
    out = []

    def walk(node: PolicyNode, ctx: Context):
        if isinstance(node, PolicyLeaf):
            out.append((tree.decision, ctx, node))
        else:
            for s, child in enumerate(node.children):
                walk(child, ctx.with_(node.var, s))

    walk(tree.root, EMPTY_CONTEXT)
    return out


# ---------------------------------------------------------------------------
# Exact solving


def solve_optimal(diagram: InfluenceDiagram, cap: int = DEFAULT_SOLVE_CAP) -> SolveResult:
    """Maximum expected value over full-information policies.

    Single-stage diagrams are solved by enumerating all full contexts of the
    decision.  Multistage diagrams are solved by expectimax over reachable
    observation/decision histories, memoized on the posterior over the
    not-yet-observed chance variables that the future depends on; ``cap``
    bounds the number of expanded nodes.
    """
    if len(diagram.stage_order) == 1:
        return _solve_single_stage(diagram, cap)
    return _solve_multistage(diagram, cap)


def _solve_single_stage(diagram: InfluenceDiagram, cap: int) -> SolveResult:
    d = diagram.stage_order[0]
    info = diagram.info_set(d)
    n_contexts = 1
    for v in info:
        n_contexts *= diagram.var(v).arity
    if n_contexts > cap:
        raise SolveCapExceeded(
            f"{n_contexts} information states exceed the solver cap {cap}"
        )
    ev_star = 0.0
    actions: dict[tuple[int, ...], int] = {}
    for combo in itertools.product(*(range(diagram.var(v).arity) for v in info)):
        ctx = Context(tuple(zip(info, combo)))
        val = action_valuation(diagram, None, d, ctx)
        ev_star += val.p * val.v_star
        actions[combo] = val.best_action
    policy = Policy({d: PolicyTree(d, _table_to_tree(diagram, info, actions, ()))})
    return SolveResult(ev_star=ev_star, policy=policy)


def _table_to_tree(
    diagram: InfluenceDiagram,
    info: tuple[str, ...],
    actions: dict[tuple[int, ...], int],
    prefix: tuple[int, ...],
) -> PolicyNode:
    if len(prefix) == len(info):
        return PolicyLeaf(actions[prefix])
    var = info[len(prefix)]
    return PolicySplit(
        var,
        tuple(
            _table_to_tree(diagram, info, actions, prefix + (s,))
            for s in range(diagram.var(var).arity)
        ),
    )


def _solve_multistage(diagram: InfluenceDiagram, cap: int) -> SolveResult:
    if diagram.meta.get("family") == "maze":
        return _solve_maze(diagram, cap)
    return _solve_history_expectimax(diagram, cap)


def _solve_maze(diagram: InfluenceDiagram, cap: int) -> SolveResult:
    """Belief-state expectimax for maze-structured diagrams.

    The posterior over the current position is a sufficient statistic for the
    remaining stages, so histories collapse onto beliefs; with noiseless
    sensors the reachable beliefs are just cell subsets.  Noiseless
    instances run in exact rational arithmetic so known-optimal values come
    out exact.
    """
    from fractions import Fraction

    positions = list(diagram.meta["positions"])
    sensors = [list(s) for s in diagram.meta["sensors"]]
    decisions = list(diagram.stage_order)
    stages = len(decisions)
    n_cells = diagram.var(positions[0]).arity
    n_actions = diagram.var(decisions[0]).arity
    goal = int(diagram.meta["goal_index"])

    exact = (
        diagram.meta.get("actuator_noise") == 0
        and diagram.meta.get("sensor_noise") == 0
    )
    num = Fraction if exact else float

    start = [num(x) for x in diagram.cpts[positions[0]][0]]
    # transition[t][a][pos] = distribution over next positions
    transition = []
    for t in range(stages):
        rows = diagram.cpts[positions[t + 1]]
        assert diagram.parents_of(positions[t + 1]) == (positions[t], decisions[t])
        transition.append(
            [
                [[num(x) for x in rows[pos * n_actions + a]] for pos in range(n_cells)]
                for a in range(n_actions)
            ]
        )
    # sensor_like[t][k][bit][pos] = P(sensor_k = bit | pos)
    sensor_like = [
        [
            [[num(row[bit]) for row in diagram.cpts[s]] for bit in (0, 1)]
            for s in sensors[t]
        ]
        for t in range(stages)
    ]

    memo: dict[tuple, tuple] = {}
    expanded = 0

    def value(t: int, belief: tuple):
        nonlocal expanded
        if t == stages:
            return belief[goal]
        key = (t, belief if exact else tuple(round(x, 12) for x in belief))
        if key in memo:
            return memo[key][0]
        expanded += 1
        if expanded > cap:
            raise SolveCapExceeded(f"belief expectimax exceeded cap {cap}")
        total = num(0)
        best_action = 0
        for obs in itertools.product((0, 1), repeat=len(sensor_like[t])):
            joint = list(belief)
            for k, bit in enumerate(obs):
                like = sensor_like[t][k][bit]
                joint = [j * like[pos] for pos, j in enumerate(joint)]
            p_obs = sum(joint)
            if p_obs <= 0:
                continue
            posterior = [j / p_obs for j in joint]
            best = None
            for a in range(n_actions):
                mats = transition[t][a]
                next_belief = [num(0)] * n_cells
                for pos, w in enumerate(posterior):
                    if w == 0:
                        continue
                    row = mats[pos]
                    for nxt in range(n_cells):
                        if row[nxt]:
                            next_belief[nxt] += w * row[nxt]
                va = value(t + 1, tuple(next_belief))
                if best is None or va > best:
                    best, best_action = va, a
            total += p_obs * best
        memo[key] = (total, best_action)
        return total

    ev_star = value(0, tuple(start))
    table = {k: v[1] for k, v in memo.items()}
    return SolveResult(ev_star=float(ev_star), action_table=table)


def _solve_history_expectimax(diagram: InfluenceDiagram, cap: int) -> SolveResult:
    """Generic multistage solver: enumerate reachable histories directly."""
    decisions = list(diagram.stage_order)
    obs_per_stage: list[tuple[str, ...]] = []
    seen: set[str] = set()
    for i, d in enumerate(decisions):
        obs = tuple(
            v
            for v in diagram.info_set(d)
            if v not in seen and diagram.var(v).kind == CHANCE
        )
        seen.update(diagram.info_set(d))
        seen.add(d)
        obs_per_stage.append(obs)
    chance = _chance_factors(diagram)
    vfac = value_factor(diagram)
    expanded = 0
    action_table: dict[tuple, int] = {}

    def prob(evidence: dict[str, int]) -> float:
        return float(_eliminate(chance, evidence, ()).table)

    def expect_value(evidence: dict[str, int]) -> float:
        num = float(_eliminate(chance + [vfac], evidence, ()).table)
        return num

    def recurse(stage: int, evidence: dict[str, int], history: tuple) -> float:
        nonlocal expanded
        expanded += 1
        if expanded > cap:
            raise SolveCapExceeded(f"history expectimax exceeded cap {cap}")
        if stage == len(decisions):
            return expect_value(evidence)  # already weighted by P(evidence)
        obs = obs_per_stage[stage]
        total = 0.0
        for combo in itertools.product(
            *(range(diagram.var(v).arity) for v in obs)
        ):
            ev2 = dict(evidence)
            ev2.update(zip(obs, combo))
            if prob(ev2) <= 0.0:
                continue
            best = None
            best_a = 0
            d = decisions[stage]
            for a in range(diagram.var(d).arity):
                ev3 = dict(ev2)
                ev3[d] = a
                sub = recurse(stage + 1, ev3, history + (combo, a))
                if best is None or sub > best:
                    best, best_a = sub, a
            action_table[history + (combo,)] = best_a
            total += best
        return total

    ev_star = recurse(0, {}, ())
    return SolveResult(ev_star=ev_star, action_table=action_table)
