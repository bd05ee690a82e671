"""Seeded generators for the two benchmark families.

``generate_1id`` builds single-decision diagrams with n independent binary
observations and a randomly structured value tree.  ``generate_maze`` builds
multistage diagrams for an agent walking a gridworld with noisy actuators
and four noisy wall sensors, rewarded for ending on the goal cell.

All randomness comes from ``numpy.random.default_rng(seed)`` and is drawn in
a documented order, so identical specs serialize byte-identically:
  1-ID: priors in variable order, then value-tree retention flags in
  depth-first construction order, then leaf values left to right.
  Mazes draw nothing; the seed only identifies the instance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diagram import (
    CHANCE,
    DECISION,
    DiagramError,
    InfluenceDiagram,
    ValueLeaf,
    ValueNode,
    ValueSplit,
    Variable,
)

# ---------------------------------------------------------------------------
# 1-ID(n)


@dataclass(frozen=True)
class OneIdSpec:
    """n independent binary observations, one binary decision."""

    n: int
    b: float
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise DiagramError("n must be >= 1")
        if not 0.0 <= self.b <= 1.0:
            raise DiagramError("b must be in [0, 1]")


_DSPLIT = object()  # placeholder: split on the decision, leaves pending


def _build_value_structure(rng, chance_ids: Sequence[str], b: float):
    """Tree skeleton with pending leaves; one retention draw per position."""
    if not chance_ids:
        return [_DSPLIT]
    head, rest = chance_ids[0], chance_ids[1:]
    if rng.random() < b:
        return [head, _build_value_structure(rng, rest, b), _build_value_structure(rng, rest, b)]
    return _build_value_structure(rng, rest, b)


def _fill_leaves(rng, node, decision_id: str, decision_arity: int) -> ValueNode:
    if node[0] is _DSPLIT:
        return ValueSplit(
            decision_id,
            tuple(ValueLeaf(rng.random()) for _ in range(decision_arity)),
        )
    var, left, right = node
    return ValueSplit(
        var,
        (
            _fill_leaves(rng, left, decision_id, decision_arity),
            _fill_leaves(rng, right, decision_id, decision_arity),
        ),
    )


def generate_1id(spec: OneIdSpec) -> InfluenceDiagram:
    """A random single-decision diagram.

    Each chance node gets a uniform prior (x, 1-x).  The value tree walks
    the chance nodes in order, keeping each as a split with probability b
    independently at every tree position, and always ends with a split on
    the decision; leaf values are uniform on [0, 1].
    """
    rng = np.random.default_rng(spec.seed)
    chance_ids = [f"C{i + 1}" for i in range(spec.n)]
    decision_id = "D"
    variables = [Variable(c, CHANCE, ("0", "1")) for c in chance_ids]
    variables.append(Variable(decision_id, DECISION, ("a0", "a1")))

    cpts = {}
    for c in chance_ids:
        x = rng.random()
        cpts[c] = ((x, 1.0 - x),)

    structure = _build_value_structure(rng, chance_ids, spec.b)
    value_tree = _fill_leaves(rng, structure, decision_id, 2)

    return InfluenceDiagram(
        variables=tuple(variables),
        parents={c: () for c in chance_ids},
        cpts=cpts,
        info_sets={decision_id: tuple(chance_ids)},
        stage_order=(decision_id,),
        value_tree=value_tree,
        meta={
            "family": "1id",
            "id": f"1id-n{spec.n}-s{spec.seed}",
            "seed": spec.seed,
            "n": spec.n,
            "b": spec.b,
        },
    )


# ---------------------------------------------------------------------------
# Mazes

DIRECTIONS = ("N", "E", "S", "W")
_DELTA = {"N": (-1, 0), "E": (0, 1), "S": (1, 0), "W": (0, -1)}


@dataclass(frozen=True)
class Grid:
    """A rectangular maze: wall sets are frozensets of ((r, c), direction)."""

    height: int
    width: int
    walls: frozenset[tuple[tuple[int, int], str]]
    goal: tuple[int, int]

    @property
    def n_cells(self) -> int:
        return self.height * self.width

    def cell_index(self, cell: tuple[int, int]) -> int:
        return cell[0] * self.width + cell[1]

    def has_wall(self, cell: tuple[int, int], direction: str) -> bool:
        r, c = cell
        dr, dc = _DELTA[direction]
        nr, nc = r + dr, c + dc
        if not (0 <= nr < self.height and 0 <= nc < self.width):
            return True
        return (cell, direction) in self.walls

    def neighbor(self, cell: tuple[int, int], direction: str) -> tuple[int, int]:
        if self.has_wall(cell, direction):
            return cell
        dr, dc = _DELTA[direction]
        return (cell[0] + dr, cell[1] + dc)


def parse_grid(text: str) -> Grid:
    """Parse the glyph grid format.

    Cells sit at odd rows/columns of the character matrix; the glyph between
    two cells is a wall unless it is a space.  ``G`` marks the goal cell.

        +-+-+
        |. G|
        + + +
        |. .|
        +-+-+
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DiagramError("empty grid text")
    height = (len(lines) - 1) // 2
    width = (len(lines[0]) - 1) // 2
    walls = set()
    goal = None
    for r in range(height):
        for c in range(width):
            glyph = lines[2 * r + 1][2 * c + 1]
            if glyph == "G":
                goal = (r, c)
            if lines[2 * r][2 * c + 1] != " ":
                walls.add(((r, c), "N"))
                if r > 0:
                    walls.add(((r - 1, c), "S"))
            if lines[2 * r + 1][2 * c] != " ":
                walls.add(((r, c), "W"))
                if c > 0:
                    walls.add(((r, c - 1), "E"))
    if goal is None:
        raise DiagramError("grid has no goal cell (mark one cell with G)")
    return Grid(height=height, width=width, walls=frozenset(walls), goal=goal)


@dataclass(frozen=True)
class MazeSpec:
    grid: Grid
    stages: int
    actuator_noise: float
    sensor_noise: float
    start: Optional[tuple[float, ...]] = None  # default: uniform over cells
    seed: int = 0

    def __post_init__(self):
        if self.stages < 1:
            raise DiagramError("stages must be >= 1")
        for noise in (self.actuator_noise, self.sensor_noise):
            if not 0.0 <= noise <= 0.5:
                raise DiagramError("noise must be in [0, 0.5]")
        if self.start is not None:
            if len(self.start) != self.grid.n_cells:
                raise DiagramError("start distribution has wrong length")
            if abs(sum(self.start) - 1.0) > 1e-12 or any(x < 0 for x in self.start):
                raise DiagramError("start distribution must be a distribution")


def _transition_row(grid: Grid, cell: tuple[int, int], action: str, noise: float):
    row = [0.0] * grid.n_cells
    if cell == grid.goal:
        row[grid.cell_index(cell)] = 1.0  # absorbing
        return tuple(row)
    for d in DIRECTIONS:
        p = (1.0 - noise) if d == action else noise / 3.0
        row[grid.cell_index(grid.neighbor(cell, d))] += p
    return tuple(row)


def generate_maze(spec: MazeSpec) -> InfluenceDiagram:
    """A ``stages``-stage maze diagram.

    Per stage: four binary wall sensors read from the current position, one
    four-way move decision observing all sensors and decisions so far
    (no-forgetting), and a position transition with actuator noise; bumping
    a wall keeps the position and the goal is absorbing.  The value tree
    splits on the final position: 1 on the goal cell, 0 elsewhere.
    """
    grid = spec.grid
    cells = [(r, c) for r in range(grid.height) for c in range(grid.width)]
    cell_states = tuple(f"r{r}c{c}" for r, c in cells)
    variables: list[Variable] = []
    parents: dict[str, tuple[str, ...]] = {}
    cpts: dict[str, tuple] = {}
    info_sets: dict[str, tuple[str, ...]] = {}
    stage_order: list[str] = []
    sensors_by_stage: list[list[str]] = []

    start = spec.start
    if start is None:
        start = tuple(1.0 / grid.n_cells for _ in cells)

    variables.append(Variable("pos0", CHANCE, cell_states))
    parents["pos0"] = ()
    cpts["pos0"] = (tuple(start),)

    observed: list[str] = []
    for t in range(1, spec.stages + 1):
        prev_pos = f"pos{t - 1}"
        stage_sensors = []
        for d in DIRECTIONS:
            s = f"s{t}{d.lower()}"
            variables.append(Variable(s, CHANCE, ("clear", "wall")))
            parents[s] = (prev_pos,)
            rows = []
            for cell in cells:
                w = 1.0 if grid.has_wall(cell, d) else 0.0
                p_wall = w * (1.0 - spec.sensor_noise) + (1.0 - w) * spec.sensor_noise
                rows.append((1.0 - p_wall, p_wall))
            cpts[s] = tuple(rows)
            stage_sensors.append(s)
        sensors_by_stage.append(stage_sensors)
        observed.extend(stage_sensors)

        dec = f"d{t}"
        variables.append(Variable(dec, DECISION, DIRECTIONS))
        info_sets[dec] = tuple(observed) + tuple(stage_order)
        stage_order.append(dec)

        pos = f"pos{t}"
        variables.append(Variable(pos, CHANCE, cell_states))
        parents[pos] = (prev_pos, dec)
        rows = []
        for cell in cells:
            for a in DIRECTIONS:
                rows.append(_transition_row(grid, cell, a, spec.actuator_noise))
        cpts[pos] = tuple(rows)

    goal_index = grid.cell_index(grid.goal)
    value_tree = ValueSplit(
        f"pos{spec.stages}",
        tuple(
            ValueLeaf(1.0 if i == goal_index else 0.0) for i in range(grid.n_cells)
        ),
    )

    return InfluenceDiagram(
        variables=tuple(variables),
        parents=parents,
        cpts=cpts,
        info_sets=info_sets,
        stage_order=tuple(stage_order),
        value_tree=value_tree,
        meta={
            "family": "maze",
            "id": f"maze-{grid.height}x{grid.width}-t{spec.stages}-s{spec.seed}",
            "seed": spec.seed,
            "stages": spec.stages,
            "actuator_noise": spec.actuator_noise,
            "sensor_noise": spec.sensor_noise,
            "positions": [f"pos{t}" for t in range(spec.stages + 1)],
            "sensors": sensors_by_stage,
            "goal_index": goal_index,
        },
    )


# ---------------------------------------------------------------------------
# Shipped maze layouts.  The original test topologies were never published;
# these four stand-ins vary in openness and corridor structure.

GRIDS: dict[str, str] = {
    "maze1": """\
+-+-+-+-+-+
|. . . . .|
+ +-+ + + +
|. .|. .|.|
+ + +-+ + +
|.|. . . .|
+ + + +-+ +
|. .|. G|.|
+ +-+ + + +
|. . . . .|
+-+-+-+-+-+
""",
    "maze2": """\
+-+-+-+-+-+
|. .|. . .|
+ + + +-+ +
|.|. .|. .|
+ +-+ + + +
|. .|.|.|.|
+-+ + +-+ +
|. .|. . .|
+ + +-+ + +
|.|. . G|.|
+-+-+-+-+-+
""",
    "maze3": """\
+-+-+-+-+-+
|. . . . .|
+-+-+ +-+-+
|. . . . .|
+ +-+-+-+ +
|. .|G|. .|
+ + + + + +
|.|. . .|.|
+ +-+ +-+ +
|. . . . .|
+-+-+-+-+-+
""",
    "maze4": """\
+-+-+-+-+-+
|G . . . .|
+ + + + + +
|. . . . .|
+ + + + + +
|. . . . .|
+ + + + + +
|. . . . .|
+ + + + + +
|. . . . .|
+-+-+-+-+-+
""",
    # Smaller layouts for the "similar problems" corpus and fixtures.
    "small1": """\
+-+-+-+
|. . .|
+ +-+ +
|. G .|
+ + + +
|. . .|
+-+-+-+
""",
    "small2": """\
+-+-+-+
|.|. .|
+ + + +
|. .|G|
+ +-+ +
|. . .|
+-+-+-+
""",
    "small3": """\
+-+-+-+
|. . G|
+-+ + +
|. . .|
+ + +-+
|. . .|
+-+-+-+
""",
    "small4": """\
+-+-+-+
|. . .|
+ + + +
|. G .|
+ + + +
|. . .|
+-+-+-+
""",
    # 4x4 fixture with a power-of-two cell count, so the uniform start
    # distribution is exact in floating point and a noiseless solve can hit
    # the known optimum exactly.
    "room4x4": """\
+-+-+-+-+
|. . . .|
+ +-+ + +
|. G . .|
+ + + + +
|. . . .|
+ + +-+ +
|. . . .|
+-+-+-+-+
""",
}

NOISE_LEVELS: tuple[float, ...] = (0.0, 0.05, 0.1, 0.2)

TEST_GRID_NAMES = ("maze1", "maze2", "maze3", "maze4")
SIMILAR_GRID_NAMES = ("small1", "small2", "small3", "small4")


# ---------------------------------------------------------------------------
# Corpora


def generate_corpus(
    family: str, count: int, base_seed: int, template: Optional[dict] = None
) -> tuple[list[InfluenceDiagram], dict]:
    """``count`` seeded instances plus a manifest recording every spec.

    1-ID instances take seeds base, base+1, ...  Maze instances cycle the
    cross product of the template's grids and noise levels in order.
    """
    template = dict(template or {})
    instances = []
    diagrams = []
    if family == "1id":
        n = int(template.get("n", 8))
        b = float(template.get("b", 0.7794))
        for i in range(count):
            spec = OneIdSpec(n=n, b=b, seed=base_seed + i)
            diagrams.append(generate_1id(spec))
            instances.append(
                {"seed": spec.seed, "spec": {"family": "1id", "n": n, "b": b}}
            )
    elif family == "maze":
        grid_names = tuple(template.get("grids", TEST_GRID_NAMES))
        noise_levels = tuple(template.get("noise_levels", NOISE_LEVELS))
        stages = int(template.get("stages", 10))
        combos = list(itertools.product(grid_names, noise_levels))
        for i in range(count):
            grid_name, noise = combos[i % len(combos)]
            spec = MazeSpec(
                grid=parse_grid(GRIDS[grid_name]),
                stages=stages,
                actuator_noise=noise,
                sensor_noise=noise,
                seed=base_seed + i,
            )
            diagrams.append(generate_maze(spec))
            instances.append(
                {
                    "seed": spec.seed,
                    "spec": {
                        "family": "maze",
                        "grid": grid_name,
                        "stages": stages,
                        "actuator_noise": noise,
                        "sensor_noise": noise,
                    },
                }
            )
    else:
        raise DiagramError(f"unknown corpus family {family!r}")
    manifest = {
        "family": family,
        "count": count,
        "base_seed": base_seed,
        "template": template,
        "instances": instances,
    }
    return diagrams, manifest
