import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexref import (
    Context,
    DiagramError,
    InfluenceDiagram,
    Policy,
    PolicyLeaf,
    PolicySplit,
    PolicyTree,
    ValueLeaf,
    ValueSplit,
    Variable,
    diagram_from_json,
    diagram_to_json,
    enumerate_leaves,
    eval_value_tree,
    generate_1id,
    policy_from_json,
    policy_to_json,
    validate,
)
from flexref.diagram import (
    CHANCE,
    DECISION,
    count_internal_nodes,
    dumps,
    is_valid,
    parent_configs,
    policy_action,
    validate_policy,
    value_tree_vars,
)
from flexref.generators import OneIdSpec


class TestVariable:
    def test_arity(self):
        assert Variable("X", CHANCE, ("a", "b", "c")).arity == 3

    def test_rejects_unknown_kind(self):
        with pytest.raises(DiagramError):
            Variable("X", "utility", ("a", "b"))

    def test_rejects_single_state(self):
        with pytest.raises(DiagramError):
            Variable("X", CHANCE, ("only",))


class TestContext:
    def test_order_insensitive(self):
        a = Context((("x", 1), ("y", 0)))
        b = Context((("y", 0), ("x", 1)))
        assert a == b
        assert hash(a) == hash(b)

    def test_with_extends(self):
        ctx = Context.of({"x": 1}).with_("y", 2)
        assert ctx.get("y") == 2
        assert "x" in ctx and "z" not in ctx
        assert len(ctx) == 2

    def test_with_rejects_reassignment(self):
        with pytest.raises(DiagramError):
            Context.of({"x": 1}).with_("x", 0)

    def test_duplicate_rejected(self):
        with pytest.raises(DiagramError):
            Context((("x", 1), ("x", 2)))

    @given(st.dictionaries(st.sampled_from("abcdef"), st.integers(0, 3)))
    def test_roundtrip_through_dict(self, d):
        assert Context.of(d).as_dict() == d


class TestValueTree:
    def test_eval_follows_path(self, exor):
        assert eval_value_tree(exor.value_tree, {"C1": 0, "C2": 1, "D": 1}) == 1.0
        assert eval_value_tree(exor.value_tree, {"C1": 0, "C2": 1, "D": 0}) == 0.0

    def test_eval_missing_variable(self, exor):
        with pytest.raises(DiagramError):
            eval_value_tree(exor.value_tree, {"C1": 0})

    def test_vars_and_counts(self, exor):
        assert value_tree_vars(exor.value_tree) == {"C1", "C2", "D"}
        assert count_internal_nodes(exor.value_tree) == 7


class TestValidate:
    def test_clean_diagram(self, exor):
        assert validate(exor) == []
        assert is_valid(exor)

    def test_bad_row_sum(self, exor):
        bad = InfluenceDiagram(
            variables=exor.variables,
            parents=exor.parents,
            cpts={**exor.cpts, "C1": ((0.6, 0.6),)},
            info_sets=exor.info_sets,
            stage_order=exor.stage_order,
            value_tree=exor.value_tree,
        )
        assert any("sums to" in m for m in validate(bad))
        assert not is_valid(bad)

    def test_missing_cpt(self, exor):
        cpts = dict(exor.cpts)
        del cpts["C2"]
        bad = InfluenceDiagram(
            variables=exor.variables,
            parents=exor.parents,
            cpts=cpts,
            info_sets=exor.info_sets,
            stage_order=exor.stage_order,
            value_tree=exor.value_tree,
        )
        assert any("no CPT" in m for m in validate(bad))

    def test_cycle_detected(self):
        d = InfluenceDiagram(
            variables=(
                Variable("A", CHANCE, ("0", "1")),
                Variable("B", CHANCE, ("0", "1")),
                Variable("D", DECISION, ("0", "1")),
            ),
            parents={"A": ("B",), "B": ("A",)},
            cpts={},
            info_sets={"D": ()},
            stage_order=("D",),
            value_tree=ValueLeaf(0.0),
        )
        assert any("cycle" in m for m in validate(d))

    def test_no_forgetting_is_warning_only(self):
        d = InfluenceDiagram(
            variables=(
                Variable("D1", DECISION, ("0", "1")),
                Variable("D2", DECISION, ("0", "1")),
            ),
            parents={},
            cpts={},
            info_sets={"D1": (), "D2": ()},
            stage_order=("D1", "D2"),
            value_tree=ValueLeaf(0.0),
        )
        report = validate(d)
        assert any(m.startswith("warning:") for m in report)
        assert is_valid(d)

    def test_value_tree_repeat_on_path(self, exor):
        tree = ValueSplit("C1", (ValueSplit("C1", (ValueLeaf(0), ValueLeaf(1))), ValueLeaf(0)))
        bad = InfluenceDiagram(
            variables=exor.variables,
            parents=exor.parents,
            cpts=exor.cpts,
            info_sets=exor.info_sets,
            stage_order=exor.stage_order,
            value_tree=tree,
        )
        assert any("repeats" in m for m in validate(bad))


class TestPolicy:
    def test_policy_action(self):
        tree = PolicyTree(
            "D",
            PolicySplit("C1", (PolicyLeaf(0), PolicySplit("C2", (PolicyLeaf(1), PolicyLeaf(0))))),
        )
        assert policy_action(tree, {"C1": 0}) == 0
        assert policy_action(tree, {"C1": 1, "C2": 0}) == 1
        with pytest.raises(DiagramError):
            policy_action(tree, {"C1": 1})

    def test_enumerate_leaves_partitions(self):
        tree = PolicyTree(
            "D",
            PolicySplit("C1", (PolicyLeaf(0), PolicySplit("C2", (PolicyLeaf(1), PolicyLeaf(0))))),
        )
        leaves = enumerate_leaves(Policy({"D": tree}))
        contexts = {ctx for _, ctx, _ in leaves}
        assert contexts == {
            Context.of({"C1": 0}),
            Context.of({"C1": 1, "C2": 0}),
            Context.of({"C1": 1, "C2": 1}),
        }

    def test_validate_policy_flags_bad_split(self, exor):
        policy = Policy(
            {"D": PolicyTree("D", PolicySplit("D", (PolicyLeaf(0), PolicyLeaf(0))))}
        )
        assert any("non-predecessor" in m for m in validate_policy(exor, policy))

    def test_validate_policy_flags_action_range(self, exor):
        policy = Policy({"D": PolicyTree("D", PolicyLeaf(7))})
        assert any("out of range" in m for m in validate_policy(exor, policy))


class TestParentConfigs:
    def test_last_parent_fastest(self, exor):
        d = InfluenceDiagram(
            variables=(
                Variable("A", CHANCE, ("0", "1")),
                Variable("B", CHANCE, ("0", "1", "2")),
                Variable("X", CHANCE, ("0", "1")),
                Variable("D", DECISION, ("0", "1")),
            ),
            parents={"A": (), "B": (), "X": ("A", "B")},
            cpts={
                "A": ((0.5, 0.5),),
                "B": ((0.2, 0.3, 0.5),),
                "X": tuple(((1.0, 0.0),) * 6),
            },
            info_sets={"D": ()},
            stage_order=("D",),
            value_tree=ValueLeaf(0.0),
        )
        configs = list(parent_configs(d, "X"))
        assert configs == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]
        assert d.cpt_row("X", (1, 2)) == d.cpts["X"][5]


class TestSerialization:
    def test_diagram_roundtrip(self, exor):
        doc = diagram_to_json(exor)
        again = diagram_from_json(json.loads(dumps(doc)))
        assert again == exor

    def test_policy_roundtrip(self):
        policy = Policy(
            {
                "D": PolicyTree(
                    "D",
                    PolicySplit(
                        "C1",
                        (PolicyLeaf(0, p=0.5, v_star=1.0, v=0.25), PolicyLeaf(1)),
                    ),
                )
            }
        )
        assert policy_from_json(policy_to_json(policy)) == policy

    def test_malformed_diagram_raises(self):
        with pytest.raises(DiagramError):
            diagram_from_json({"variables": []})

    def test_canonical_dumps_is_stable(self, exor):
        assert dumps(diagram_to_json(exor)) == dumps(diagram_to_json(exor))

    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(1, 6),
        b=st.floats(0.0, 1.0),
        seed=st.integers(0, 10_000),
    )
    def test_generated_diagram_roundtrip(self, n, b, seed):
        d = generate_1id(OneIdSpec(n=n, b=b, seed=seed))
        again = diagram_from_json(json.loads(dumps(diagram_to_json(d))))
        assert again == d
        assert validate(again) == []
