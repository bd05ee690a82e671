"""Discrete influence diagrams, value trees, contexts and tree policies.

The data model is deliberately inference-free: it knows how to represent and
validate diagrams and policies, evaluate a value tree at a full assignment,
and round-trip everything through JSON.  Probabilistic computation lives in
:mod:`flexref.inference`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Union

CHANCE = "chance"
DECISION = "decision"

ROW_SUM_TOL = 1e-12


class DiagramError(ValueError):
    """Raised for structurally invalid diagrams, policies or contexts."""


@dataclass(frozen=True)
class Variable:
    """A discrete chance or decision variable."""

    id: str
    kind: str
    states: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in (CHANCE, DECISION):
            raise DiagramError(f"unknown variable kind {self.kind!r}")
        if len(self.states) < 2:
            raise DiagramError(f"variable {self.id!r} needs arity >= 2")
        object.__setattr__(self, "states", tuple(self.states))

    @property
    def arity(self) -> int:
        return len(self.states)


# ---------------------------------------------------------------------------
# Value trees


@dataclass(frozen=True)
class ValueLeaf:
    value: float


@dataclass(frozen=True)
class ValueSplit:
    var: str
    children: tuple["ValueNode", ...]


ValueNode = Union[ValueLeaf, ValueSplit]


def value_tree_vars(tree: ValueNode) -> set[str]:
    """All variable ids appearing as splits in the tree."""
    out: set[str] = set()
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, ValueSplit):
            out.add(node.var)
            stack.extend(node.children)
    return out


def count_internal_nodes(tree: ValueNode) -> int:
    n = 0
    stack = [tree]
    while stack:
        node = stack.pop()
        if isinstance(node, ValueSplit):
            n += 1
            stack.extend(node.children)
    return n


# ---------------------------------------------------------------------------
# Contexts


@dataclass(frozen=True)
class Context:
    """A partial assignment of state indices to variables.

    Stored sorted by variable id so that equal assignments compare and hash
    equal regardless of construction order.
    """

    items: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        seen = set()
        for var, _ in self.items:
            if var in seen:
                raise DiagramError(f"variable {var!r} assigned twice in context")
            seen.add(var)
        object.__setattr__(self, "items", tuple(sorted(self.items)))

    @classmethod
    def of(cls, assignments: Mapping[str, int]) -> "Context":
        return cls(tuple(assignments.items()))

    def get(self, var: str) -> Optional[int]:
        for v, s in self.items:
            if v == var:
                return s
        return None

    def __contains__(self, var: str) -> bool:
        return self.get(var) is not None

    def __len__(self) -> int:
        return len(self.items)

    def with_(self, var: str, state: int) -> "Context":
        if var in self:
            raise DiagramError(f"variable {var!r} already assigned")
        return Context(self.items + ((var, state),))

    def as_dict(self) -> dict[str, int]:
        return dict(self.items)

    def vars(self) -> frozenset[str]:
        return frozenset(v for v, _ in self.items)


EMPTY_CONTEXT = Context()


# ---------------------------------------------------------------------------
# Influence diagrams


@dataclass(frozen=True)
class InfluenceDiagram:
    """A discrete influence diagram with a single tree-shaped value function.

    ``cpts`` maps each chance variable to its rows, one row per parent
    configuration in row-major order with the *last* parent varying fastest.
    ``info_sets`` lists the informational predecessors of each decision;
    ``stage_order`` is the total order on decisions.
    """

    variables: tuple[Variable, ...]
    parents: Mapping[str, tuple[str, ...]]
    cpts: Mapping[str, tuple[tuple[float, ...], ...]]
    info_sets: Mapping[str, tuple[str, ...]]
    stage_order: tuple[str, ...]
    value_tree: ValueNode
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(
            self, "parents", {k: tuple(v) for k, v in self.parents.items()}
        )
        object.__setattr__(
            self,
            "cpts",
            {k: tuple(tuple(row) for row in rows) for k, rows in self.cpts.items()},
        )
        object.__setattr__(
            self, "info_sets", {k: tuple(v) for k, v in self.info_sets.items()}
        )
        object.__setattr__(self, "stage_order", tuple(self.stage_order))
        object.__setattr__(self, "_by_id", {v.id: v for v in self.variables})

    def var(self, var_id: str) -> Variable:
        try:
            return self._by_id[var_id]
        except KeyError:
            raise DiagramError(f"unknown variable {var_id!r}") from None

    def has_var(self, var_id: str) -> bool:
        return var_id in self._by_id

    @property
    def chance_vars(self) -> tuple[Variable, ...]:
        return tuple(v for v in self.variables if v.kind == CHANCE)

    @property
    def decision_vars(self) -> tuple[Variable, ...]:
        return tuple(v for v in self.variables if v.kind == DECISION)

    def parents_of(self, var_id: str) -> tuple[str, ...]:
        return self.parents.get(var_id, ())

    def info_set(self, decision_id: str) -> tuple[str, ...]:
        return self.info_sets.get(decision_id, ())

    def stage_index(self, decision_id: str) -> int:
        return self.stage_order.index(decision_id)

    def cpt_row(self, var_id: str, parent_states: Iterable[int]) -> tuple[float, ...]:
        """Row of ``var_id``'s CPT for the given parent state indices."""
        idx = 0
        for p, s in zip(self.parents_of(var_id), parent_states):
            idx = idx * self.var(p).arity + s
        return self.cpts[var_id][idx]


def parent_configs(diagram: InfluenceDiagram, var_id: str) -> Iterator[tuple[int, ...]]:
    """All parent state combinations, last parent fastest."""
    arities = [diagram.var(p).arity for p in diagram.parents_of(var_id)]
    combo = [0] * len(arities)
    while True:
        yield tuple(combo)
        for i in reversed(range(len(arities))):
            combo[i] += 1
            if combo[i] < arities[i]:
                break
            combo[i] = 0
        else:
            return


# ---------------------------------------------------------------------------
# Policies


@dataclass(frozen=True)
class PolicyLeaf:
    """A leaf prescribing an action, with optional cached statistics.

    ``p``, ``v_star`` and ``v`` mirror the quantities the refinement engine
    caches per context; the data model treats them as opaque.
    """

    action: int
    p: Optional[float] = None
    v_star: Optional[float] = None
    v: Optional[float] = None


@dataclass(frozen=True)
class PolicySplit:
    var: str
    children: tuple["PolicyNode", ...]


PolicyNode = Union[PolicyLeaf, PolicySplit]


@dataclass(frozen=True)
class PolicyTree:
    decision: str
    root: PolicyNode


@dataclass(frozen=True)
class Policy:
    """One PolicyTree per decision variable."""

    trees: Mapping[str, PolicyTree]

    def __post_init__(self):
        object.__setattr__(self, "trees", dict(self.trees))

    def tree(self, decision_id: str) -> PolicyTree:
        try:
            return self.trees[decision_id]
        except KeyError:
            raise DiagramError(f"policy has no tree for {decision_id!r}") from None

    def with_tree(self, tree: PolicyTree) -> "Policy":
        trees = dict(self.trees)
        trees[tree.decision] = tree
        return Policy(trees)


def policy_action(tree: PolicyTree, assignment: Mapping[str, int]) -> int:
    """Action prescribed for a full assignment to the split variables."""
    node = tree.root
    while isinstance(node, PolicySplit):
        state = assignment.get(node.var)
        if state is None:
            raise DiagramError(
                f"assignment missing split variable {node.var!r} in tree "
                f"for {tree.decision!r}"
            )
        node = node.children[state]
    return node.action


def enumerate_leaves(policy: Policy) -> list[tuple[str, Context, PolicyLeaf]]:
    """Every leaf of every tree paired with its path context.

    The length of this list is the leaf count entering the latent-value
    denominator once non-refinable leaves are filtered out by the engine.
    """
    out: list[tuple[str, Context, PolicyLeaf]] = []
    for decision in policy.trees:

        def walk(node: PolicyNode, ctx: Context) -> None:
            if isinstance(node, PolicyLeaf):
                out.append((decision, ctx, node))
            else:
                for state, child in enumerate(node.children):
                    walk(child, ctx.with_(node.var, state))

        walk(policy.trees[decision].root, EMPTY_CONTEXT)
    return out


def policy_split_vars(tree: PolicyTree) -> set[str]:
    out: set[str] = set()
    stack = [tree.root]
    while stack:
        node = stack.pop()
        if isinstance(node, PolicySplit):
            out.add(node.var)
            stack.extend(node.children)
    return out


# ---------------------------------------------------------------------------
# Evaluation and validation


def eval_value_tree(tree: ValueNode, assignment: Mapping[str, int] | Context) -> float:
    """Follow split variables down to a leaf and return its value.

    ``assignment`` must cover every variable on the followed path.
    """
    if isinstance(assignment, Context):
        assignment = assignment.as_dict()
    node = tree
    while isinstance(node, ValueSplit):
        state = assignment.get(node.var)
        if state is None:
            raise DiagramError(f"assignment missing value-tree variable {node.var!r}")
        node = node.children[state]
    return node.value


def validate(diagram: InfluenceDiagram) -> list[str]:
    """Check diagram invariants, returning one message per violation.

    An empty report means the diagram is well-formed.  No-forgetting
    violations are reported with a ``warning:`` prefix and do not make the
    diagram invalid.
    """
    report: list[str] = []
    ids = [v.id for v in diagram.variables]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        report.append(f"duplicate variable ids: {dupes}")
        return report
    known = set(ids)

    for var_id, ps in diagram.parents.items():
        if var_id not in known:
            report.append(f"parents given for unknown variable {var_id!r}")
        for p in ps:
            if p not in known:
                report.append(f"unknown parent {p!r} of {var_id!r}")
    if _has_cycle(diagram):
        report.append("parent graph contains a cycle")
        return report

    for v in diagram.chance_vars:
        rows = diagram.cpts.get(v.id)
        if rows is None:
            report.append(f"chance variable {v.id!r} has no CPT")
            continue
        n_rows = 1
        for p in diagram.parents_of(v.id):
            if p in known:
                n_rows *= diagram.var(p).arity
        if len(rows) != n_rows:
            report.append(
                f"CPT of {v.id!r} has {len(rows)} rows, expected {n_rows}"
            )
            continue
        for i, row in enumerate(rows):
            if len(row) != v.arity:
                report.append(f"CPT row {i} of {v.id!r} has wrong width")
                continue
            if any(x < 0 for x in row):
                report.append(f"CPT row {i} of {v.id!r} has a negative entry")
            if abs(sum(row) - 1.0) > ROW_SUM_TOL:
                report.append(
                    f"CPT row {i} of {v.id!r} sums to {sum(row)!r}, expected 1"
                )

    decisions = [v.id for v in diagram.decision_vars]
    if sorted(diagram.stage_order) != sorted(decisions):
        report.append("stage_order does not list exactly the decision variables")
    for d in decisions:
        for x in diagram.info_set(d):
            if x not in known:
                report.append(f"unknown informational predecessor {x!r} of {d!r}")
    # No-forgetting is a warning only; generated problems satisfy it.
    for i, d in enumerate(diagram.stage_order):
        earlier = set(diagram.stage_order[:i])
        missing = earlier - set(diagram.info_set(d))
        if missing:
            report.append(
                f"warning: decision {d!r} does not observe earlier "
                f"decisions {sorted(missing)} (no-forgetting relaxed)"
            )

    for var_id in sorted(value_tree_vars(diagram.value_tree)):
        if var_id not in known:
            report.append(f"value tree references unknown variable {var_id!r}")
    report.extend(_check_value_tree(diagram, diagram.value_tree, ()))
    return report


def is_valid(diagram: InfluenceDiagram) -> bool:
    return not any(not m.startswith("warning:") for m in validate(diagram))


def _check_value_tree(
    diagram: InfluenceDiagram, node: ValueNode, path: tuple[str, ...]
) -> list[str]:
    import math

    if isinstance(node, ValueLeaf):
        if not math.isfinite(node.value):
            return [f"value-tree leaf is not finite: {node.value!r}"]
        return []
    report = []
    if node.var in path:
        report.append(f"variable {node.var!r} repeats on a value-tree path")
    if diagram.has_var(node.var) and len(node.children) != diagram.var(node.var).arity:
        report.append(f"value-tree split on {node.var!r} has wrong child count")
    for child in node.children:
        report.extend(_check_value_tree(diagram, child, path + (node.var,)))
    return report


def _has_cycle(diagram: InfluenceDiagram) -> bool:
    color: dict[str, int] = {}

    def visit(v: str) -> bool:
        color[v] = 1
        for p in diagram.parents_of(v):
            c = color.get(p, 0)
            if c == 1 or (c == 0 and visit(p)):
                return True
        color[v] = 2
        return False

    return any(color.get(v.id, 0) == 0 and visit(v.id) for v in diagram.variables)


def validate_policy(diagram: InfluenceDiagram, policy: Policy) -> list[str]:
    """Check policy invariants against a diagram."""
    report: list[str] = []
    decisions = {v.id for v in diagram.decision_vars}
    if set(policy.trees) != decisions:
        report.append(
            f"policy decisions {sorted(policy.trees)} do not match "
            f"diagram decisions {sorted(decisions)}"
        )
        return report
    for d, tree in policy.trees.items():
        info = set(diagram.info_set(d))
        arity = diagram.var(d).arity

        def walk(node: PolicyNode, path: set[str]) -> None:
            if isinstance(node, PolicyLeaf):
                if node.action >= arity:
                    report.append(f"tree for {d!r}: action {node.action} out of range")
                return
            if node.var not in info:
                report.append(
                    f"tree for {d!r}: split on non-predecessor {node.var!r}"
                )
            if node.var in path:
                report.append(f"tree for {d!r}: {node.var!r} repeats on a path")
            if diagram.has_var(node.var):
                if len(node.children) != diagram.var(node.var).arity:
                    report.append(
                        f"tree for {d!r}: split on {node.var!r} has wrong child count"
                    )
            for child in node.children:
                walk(child, path | {node.var})

        walk(tree.root, set())
    return report


# ---------------------------------------------------------------------------
# JSON serialization


def _value_node_to_json(node: ValueNode):
    if isinstance(node, ValueLeaf):
        return {"value": node.value}
    return {"var": node.var, "children": [_value_node_to_json(c) for c in node.children]}


def _value_node_from_json(obj) -> ValueNode:
    if "value" in obj:
        return ValueLeaf(float(obj["value"]))
    return ValueSplit(obj["var"], tuple(_value_node_from_json(c) for c in obj["children"]))


def diagram_to_json(diagram: InfluenceDiagram) -> dict:
    return {
        "variables": [
            {"id": v.id, "kind": v.kind, "states": list(v.states)}
            for v in diagram.variables
        ],
        "parents": {k: list(v) for k, v in diagram.parents.items()},
        "cpts": {k: [list(row) for row in rows] for k, rows in diagram.cpts.items()},
        "decisions": {
            "order": list(diagram.stage_order),
            "info_sets": {k: list(v) for k, v in diagram.info_sets.items()},
        },
        "value_tree": _value_node_to_json(diagram.value_tree),
        "meta": dict(diagram.meta),
    }


def diagram_from_json(obj: dict) -> InfluenceDiagram:
    try:
        variables = tuple(
            Variable(v["id"], v["kind"], tuple(v["states"])) for v in obj["variables"]
        )
        decisions = obj["decisions"]
        return InfluenceDiagram(
            variables=variables,
            parents={k: tuple(v) for k, v in obj["parents"].items()},
            cpts={
                k: tuple(tuple(float(x) for x in row) for row in rows)
                for k, rows in obj["cpts"].items()
            },
            info_sets={k: tuple(v) for k, v in decisions["info_sets"].items()},
            stage_order=tuple(decisions["order"]),
            value_tree=_value_node_from_json(obj["value_tree"]),
            meta=obj.get("meta", {}),
        )
    except (KeyError, TypeError) as exc:
        raise DiagramError(f"malformed diagram document: {exc}") from exc


def _policy_node_to_json(node: PolicyNode):
    if isinstance(node, PolicyLeaf):
        out: dict = {"action": node.action}
        if node.p is not None:
            out["stats"] = {"p": node.p, "v_star": node.v_star, "v": node.v}
        return out
    return {
        "split": node.var,
        "children": [_policy_node_to_json(c) for c in node.children],
    }


def _policy_node_from_json(obj) -> PolicyNode:
    if "action" in obj:
        stats = obj.get("stats") or {}
        return PolicyLeaf(
            int(obj["action"]),
            p=stats.get("p"),
            v_star=stats.get("v_star"),
            v=stats.get("v"),
        )
    return PolicySplit(
        obj["split"], tuple(_policy_node_from_json(c) for c in obj["children"])
    )


def policy_to_json(policy: Policy) -> dict:
    return {d: _policy_node_to_json(t.root) for d, t in sorted(policy.trees.items())}


def policy_from_json(obj: dict) -> Policy:
    try:
        return Policy({d: PolicyTree(d, _policy_node_from_json(t)) for d, t in obj.items()})
    except (KeyError, TypeError) as exc:
        raise DiagramError(f"malformed policy document: {exc}") from exc


def context_to_json(ctx: Context) -> dict:
    return ctx.as_dict()


def context_from_json(obj: Mapping[str, int]) -> Context:
    return Context.of({k: int(v) for k, v in obj.items()})


def dumps(obj: dict) -> str:
    """Canonical JSON text: sorted keys, fixed separators, repr floats."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
