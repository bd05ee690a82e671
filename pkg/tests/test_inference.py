import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import _oracle
from flexref import (
    Context,
    DiagramError,
    SolveCapExceeded,
    action_valuation,
    context_probability,
    eval_policy,
    generate_1id,
    generate_maze,
    initial_policy,
    run_refinement,
    solve_optimal,
)
from flexref.diagram import EMPTY_CONTEXT
from flexref.generators import GRIDS, MazeSpec, OneIdSpec, parse_grid
from flexref.inference import full_information_bound, restricted_value_root
from flexref.refinement import RefinementEngine


def small_1id(seed, n=4):
    return generate_1id(OneIdSpec(n=n, b=0.7794, seed=seed))


class TestContextProbability:
    def test_empty_context(self, exor):
        assert context_probability(exor, None, EMPTY_CONTEXT) == 1.0

    def test_unknown_variable(self, exor):
        with pytest.raises(DiagramError):
            context_probability(exor, None, Context.of({"nope": 0}))

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 500), data=st.data())
    def test_matches_oracle(self, seed, data):
        d = small_1id(seed)
        policy = initial_policy(d)
        k = data.draw(st.integers(0, 3))
        vars_ = data.draw(
            st.lists(st.sampled_from([v.id for v in d.chance_vars]), max_size=k, unique=True)
        )
        ctx = Context.of({v: data.draw(st.integers(0, 1)) for v in vars_})
        got = context_probability(d, policy, ctx)
        want = _oracle.context_probability(d, policy, ctx)
        assert got == pytest.approx(want, abs=1e-12)


class TestActionValuation:
    def test_zero_probability_context(self):
        d = small_1id(3)
        # force an impossible context by zeroing one prior outcome
        cpts = dict(d.cpts)
        cpts["C1"] = ((1.0, 0.0),)
        from dataclasses import replace

        d0 = replace(d, cpts=cpts)
        val = action_valuation(d0, initial_policy(d0), "D", Context.of({"C1": 1}))
        assert val.p == 0.0
        assert val.values == (0.0, 0.0)
        assert val.v_star == 0.0

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 500), s1=st.integers(0, 1), s2=st.integers(0, 1))
    def test_matches_oracle(self, seed, s1, s2):
        d = small_1id(seed)
        policy = initial_policy(d)
        ctx = Context.of({"C1": s1, "C3": s2})
        got = action_valuation(d, policy, "D", ctx)
        values, p, best = _oracle.action_values(d, policy, "D", ctx)
        assert got.p == pytest.approx(p, abs=1e-12)
        for g, w in zip(got.values, values):
            assert g == pytest.approx(w, abs=1e-12)
        assert got.best_action == best
        assert got.v_star == max(got.values)
        assert got.v == sorted(got.values)[-2]


class TestEvalPolicy:
    def test_exor_initial(self, exor):
        assert eval_policy(exor, initial_policy(exor)) == pytest.approx(0.5, abs=1e-15)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 500), steps=st.integers(0, 6))
    def test_matches_oracle_along_refinement(self, seed, steps):
        d = small_1id(seed)
        engine = RefinementEngine(d)
        for _ in range(steps):
            if engine.peek() is None:
                break
            engine.step()
        got = eval_policy(d, engine.policy)
        want = _oracle.eval_policy(d, engine.policy)
        assert got == pytest.approx(want, abs=1e-12)
        assert engine.ev == pytest.approx(want, abs=1e-9)


class TestSolveOptimal:
    def test_exor(self, exor):
        assert solve_optimal(exor).ev_star == pytest.approx(1.0, abs=1e-15)

    def test_matches_oracle_on_small_instances(self):
        for seed in range(10):
            d = small_1id(seed, n=5)
            got = solve_optimal(d).ev_star
            want = _oracle.solve_single_decision(d)
            assert got == pytest.approx(want, abs=1e-9)

    def test_solution_policy_attains_ev_star(self):
        d = small_1id(11, n=5)
        result = solve_optimal(d)
        assert eval_policy(d, result.policy) == pytest.approx(result.ev_star, abs=1e-12)

    def test_cap_exceeded(self):
        d = generate_1id(OneIdSpec(n=8, b=0.7794, seed=0))
        with pytest.raises(SolveCapExceeded):
            solve_optimal(d, cap=16)

    def test_single_stage_maze_matches_oracle(self):
        spec = MazeSpec(
            grid=parse_grid(GRIDS["small1"]), stages=1,
            actuator_noise=0.1, sensor_noise=0.1,
        )
        d = generate_maze(spec)
        got = solve_optimal(d).ev_star
        want = _oracle.solve_single_decision(d)
        assert got == pytest.approx(want, abs=1e-9)

    def test_noiseless_maze_reaches_goal_surely(self):
        spec = MazeSpec(
            grid=parse_grid(GRIDS["room4x4"]), stages=5,
            actuator_noise=0.0, sensor_noise=0.0,
        )
        assert solve_optimal(generate_maze(spec)).ev_star == 1.0

    def test_noisy_multistage_maze_bounds_refinement(self):
        spec = MazeSpec(
            grid=parse_grid(GRIDS["small2"]), stages=3,
            actuator_noise=0.1, sensor_noise=0.05,
        )
        d = generate_maze(spec)
        ev_star = solve_optimal(d).ev_star
        profile = run_refinement(d, max_steps=8)
        assert 0.0 < ev_star <= 1.0
        assert profile.final_ev <= ev_star + 1e-9


class TestBoundsAndAlignment:
    def test_full_information_bound_dominates_actions(self):
        d = small_1id(7)
        policy = initial_policy(d)
        for s in (0, 1):
            ctx = Context.of({"C2": s})
            bound = full_information_bound(d, "D", ctx)
            val = action_valuation(d, policy, "D", ctx)
            assert bound >= max(val.values) - 1e-12

    def test_full_information_bound_multistage_is_none(self):
        spec = MazeSpec(
            grid=parse_grid(GRIDS["small1"]), stages=2,
            actuator_noise=0.0, sensor_noise=0.0,
        )
        d = generate_maze(spec)
        assert full_information_bound(d, "d1", EMPTY_CONTEXT) is None

    def test_restricted_value_root_walks_assignments(self, exor):
        assert restricted_value_root(exor, "D", EMPTY_CONTEXT) == "C1"
        assert restricted_value_root(exor, "D", Context.of({"C1": 0})) == "C2"
        assert restricted_value_root(exor, "D", Context.of({"C1": 0, "C2": 1})) is None
