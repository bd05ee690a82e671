import pytest

from flexref import (
    InfluenceDiagram,
    ValueLeaf,
    ValueSplit,
    Variable,
)
from flexref.diagram import CHANCE, DECISION


def exclusive_or_diagram() -> InfluenceDiagram:
    """Two fair binary coins; the payoff is 1 exactly when the action
    matches their parity.  Either coin alone is worthless, which makes the
    first refinement a plateau step."""
    match = (ValueLeaf(1.0), ValueLeaf(0.0))
    mismatch = (ValueLeaf(0.0), ValueLeaf(1.0))
    value_tree = ValueSplit(
        "C1",
        (
            ValueSplit("C2", (ValueSplit("D", match), ValueSplit("D", mismatch))),
            ValueSplit("C2", (ValueSplit("D", mismatch), ValueSplit("D", match))),
        ),
    )
    return InfluenceDiagram(
        variables=(
            Variable("C1", CHANCE, ("0", "1")),
            Variable("C2", CHANCE, ("0", "1")),
            Variable("D", DECISION, ("a0", "a1")),
        ),
        parents={"C1": (), "C2": ()},
        cpts={"C1": ((0.5, 0.5),), "C2": ((0.5, 0.5),)},
        info_sets={"D": ("C1", "C2")},
        stage_order=("D",),
        value_tree=value_tree,
        meta={"id": "exor", "seed": 0},
    )


@pytest.fixture
def exor():
    return exclusive_or_diagram()
