"""Independent brute-force reference implementations.

Everything here works by full-joint enumeration over chance variables and
deliberately shares no code with the library's inference engine: tree
lookups are reimplemented locally and CPT row indexing is done by hand.
Only usable on small diagrams.
"""

import itertools

from flexref.diagram import CHANCE, DECISION, PolicyLeaf, ValueLeaf


def _follow_policy(tree_root, assignment):
    node = tree_root
    while not isinstance(node, PolicyLeaf):
        node = node.children[assignment[node.var]]
    return node.action


def _follow_value(node, assignment):
    while not isinstance(node, ValueLeaf):
        node = node.children[assignment[node.var]]
    return node.value


def _row_for(diagram, var_id, assignment):
    idx = 0
    for p in diagram.parents.get(var_id, ()):
        idx = idx * len(diagram.var(p).states) + assignment[p]
    return diagram.cpts[var_id][idx]


def chance_assignments(diagram):
    """Yield (assignment dict over chance vars, probability weight is NOT
    attached; use joint_probability once decisions are filled in)."""
    chance = [v for v in diagram.variables if v.kind == CHANCE]
    names = [v.id for v in chance]
    for combo in itertools.product(*(range(len(v.states)) for v in chance)):
        yield dict(zip(names, combo))


def joint_probability(diagram, assignment):
    """Probability of a full assignment (decisions included, weight 1)."""
    p = 1.0
    for v in diagram.variables:
        if v.kind == CHANCE:
            p *= _row_for(diagram, v.id, assignment)[assignment[v.id]]
            if p == 0.0:
                return 0.0
    return p


def _complete(diagram, policy, assignment):
    """Fill in every decision by following its policy tree, in stage order."""
    full = dict(assignment)
    for d in diagram.stage_order:
        full[d] = _follow_policy(policy.trees[d].root, full)
    return full


def eval_policy(diagram, policy):
    total = 0.0
    for assignment in chance_assignments(diagram):
        full = _complete(diagram, policy, assignment)
        p = joint_probability(diagram, full)
        if p:
            total += p * _follow_value(diagram.value_tree, full)
    return total


def context_probability(diagram, policy, context):
    total = 0.0
    want = context.as_dict()
    for assignment in chance_assignments(diagram):
        full = _complete(diagram, policy, assignment)
        if all(full[k] == s for k, s in want.items()):
            total += joint_probability(diagram, full)
    return total


def action_values(diagram, policy, decision, context):
    """Conditional expected value per action of ``decision`` given the
    context, all other decisions following the policy.  Returns
    (values, p, best_action); values are all zero when p is zero."""
    arity = len(diagram.var(decision).states)
    want = context.as_dict()
    totals = [0.0] * arity
    p_ctx = 0.0
    for assignment in chance_assignments(diagram):
        full = _complete(diagram, policy, assignment)
        if not all(full[k] == s for k, s in want.items()):
            continue
        p = joint_probability(diagram, full)
        if p == 0.0:
            continue
        p_ctx += p
        for a in range(arity):
            forced = dict(assignment)
            forced[decision] = a
            # later decisions may read this one, so re-complete around it
            for d in diagram.stage_order:
                if d != decision:
                    forced[d] = _follow_policy(policy.trees[d].root, forced)
            totals[a] += p * _follow_value(diagram.value_tree, forced)
    if p_ctx == 0.0:
        return [0.0] * arity, 0.0, 0
    values = [t / p_ctx for t in totals]
    best = max(range(arity), key=lambda a: (values[a], -a))
    return values, p_ctx, best


def solve_single_decision(diagram):
    """Exact optimum for a diagram with one decision: accumulate per-action
    totals for every information context in one pass over the joint, then
    take the best action in each context."""
    (decision,) = diagram.stage_order
    info = diagram.info_sets[decision]
    arity = len(diagram.var(decision).states)
    totals = {}
    for assignment in chance_assignments(diagram):
        key = tuple(assignment[x] for x in info)
        row = totals.setdefault(key, [0.0] * arity)
        for a in range(arity):
            full = dict(assignment)
            full[decision] = a
            p = joint_probability(diagram, full)
            if p:
                row[a] += p * _follow_value(diagram.value_tree, full)
    return sum(max(row) for row in totals.values())
