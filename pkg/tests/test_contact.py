from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypercp.contact import (
    SimParams,
    StopRule,
    batch_extinction,
    build_graphical,
    count_traces,
    evolve_from_record,
    has_trace,
    simple_paths,
    simulate,
)
from hypercp.errors import BudgetError
from hypercp.exact_oracle import exact_extinction_probability
from hypercp.graph import graph_from_edges, make_star
from hypercp.sampler import RngStream

K2 = graph_from_edges(2, [(0, 1)])
K4 = graph_from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])


def test_sim_params_rejects_negative_rate_only():
    with pytest.raises(ValueError):
        SimParams(-0.1)
    SimParams(0.0)
    SimParams(2.5)


def test_stop_rule_validation():
    with pytest.raises(ValueError):
        StopRule(t_max=0.0)
    with pytest.raises(ValueError):
        StopRule(t_max=1.0, escape_radius=0)
    with pytest.raises(ValueError):
        StopRule(t_max=1.0, mass_cap=0)
    StopRule(t_max=1.0, escape_radius=None, mass_cap=None)


def test_simulate_is_deterministic_given_the_stream():
    stop = StopRule(t_max=5.0)
    a = simulate(K4, [0], SimParams(0.8), stop, RngStream(42, 0))
    b = simulate(K4, [0], SimParams(0.8), stop, RngStream(42, 0))
    assert a.verdict == b.verdict
    assert a.extinction_time == b.extinction_time
    assert a.ever_infected_count == b.ever_infected_count


def test_lambda_zero_is_pure_recovery():
    # a lone infected vertex dies at an exponential rate-one time
    g = graph_from_edges(1, [])
    extinct, time_sum = batch_extinction(g, [0], SimParams(0.0), 50.0, 20000, RngStream(3, 0))
    assert extinct == 20000
    assert time_sum / extinct == pytest.approx(1.0, abs=0.05)


def test_pair_extinction_time_matches_first_step_solve():
    # both infected on a single edge: E[tau] = 3/2 + lam/2
    for lam, want in ((1.0, 2.0), (0.4, 1.7)):
        extinct, time_sum = batch_extinction(
            K2, [0, 1], SimParams(lam), 1000.0, 30000, RngStream(11, 0)
        )
        assert extinct == 30000
        assert time_sum / extinct == pytest.approx(want, abs=0.06)


@pytest.mark.parametrize("engine", ["dynamic", "static"])
def test_both_engines_match_the_exact_law(engine):
    lam, t, trials = 1.0, 2.0, 4000
    want = exact_extinction_probability(K2, [0, 1], lam, t)
    stop = StopRule(t_max=t)
    extinct = 0
    rng = RngStream(19, 0)
    seeds = rng.gen.integers(0, 1 << 64, size=trials, dtype=np.uint64)
    for i in range(trials):
        res = simulate(
            K2, [0, 1], SimParams(lam), stop, RngStream(int(seeds[i]), 0), engine=engine
        )
        extinct += res.verdict == "extinct"
    emp = extinct / trials
    se = math.sqrt(want * (1.0 - want) / trials)
    assert abs(emp - want) < 4.0 * se


def test_horizon_verdict_and_trajectory_fill():
    res = simulate(
        K2,
        [0, 1],
        SimParams(5.0),
        StopRule(t_max=0.01),
        RngStream(5, 0),
        sample_times=[0.0, 0.005, 0.01],
    )
    assert res.verdict in {"horizon", "extinct"}
    assert res.trajectory.shape == (3, 2)
    assert res.trajectory[0, 1] == 2.0


def test_mass_cap_verdict_on_a_star():
    g = make_star(200)
    res = simulate(
        g,
        [0],
        SimParams(5.0),
        StopRule(t_max=1e4, mass_cap=50),
        RngStream(8, 0),
    )
    assert res.verdict == "mass-cap"
    assert res.ever_infected_count >= 50


def test_escape_verdict_on_a_line():
    line = graph_from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)])
    res = simulate(
        line,
        [0],
        SimParams(30.0),
        StopRule(t_max=100.0, escape_radius=3),
        RngStream(1, 0),
        reference=0,
    )
    assert res.verdict == "escape"
    assert res.max_graph_distance_reached >= 3


def test_batch_extinction_validates_inputs():
    with pytest.raises(ValueError):
        batch_extinction(K2, [0], SimParams(1.0), 1.0, 0, RngStream(0, 0))
    with pytest.raises(ValueError):
        batch_extinction(K2, [0], SimParams(1.0), 0.0, 10, RngStream(0, 0))


def _trace_dp_mirror(rec, gamma) -> bool:
    """Independent chronological sweep for the trace query."""
    alive = [False] * len(gamma)
    alive[0] = True
    if len(gamma) == 1:
        return True
    order = np.argsort(rec.ev_time, kind="stable")
    for e in order:
        a, b = int(rec.ev_a[e]), int(rec.ev_b[e])
        if rec.ev_kind[e] == 0:
            for j, v in enumerate(gamma):
                if v == a:
                    alive[j] = False
            alive[0] = alive[0] and gamma[0] != a
        else:
            for j in range(len(gamma) - 2, -1, -1):
                if alive[j] and gamma[j] == a and gamma[j + 1] == b:
                    if j + 1 == len(gamma) - 1:
                        return True
                    alive[j + 1] = True
    return False


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=60, deadline=None)
def test_has_trace_agrees_with_a_python_mirror(seed):
    rec = build_graphical(K4, SimParams(0.7), 1.5, RngStream(seed, 0))
    for gamma in simple_paths(K4, 3):
        assert has_trace(rec, gamma) == _trace_dp_mirror(rec, gamma), (seed, gamma)


def test_count_traces_equals_the_sum_of_single_queries():
    rng = RngStream(23, 0)
    records = [build_graphical(K4, SimParams(0.5), 2.0, rng) for _ in range(40)]
    for gamma in [(0,), (0, 1), (2, 0, 1), (3, 1, 0, 2)]:
        assert count_traces(records, gamma) == sum(has_trace(r, gamma) for r in records)


def test_count_traces_rejects_bad_paths():
    records = [build_graphical(K2, SimParams(0.5), 1.0, RngStream(1, 0))]
    with pytest.raises(ValueError):
        count_traces(records, ())
    with pytest.raises(ValueError):
        count_traces(records, (0, 7))


def test_simple_paths_counts_on_complete_and_line_graphs():
    paths = simple_paths(K4, 4)
    assert len(paths) == 64
    by_len = {}
    for p in paths:
        by_len[len(p)] = by_len.get(len(p), 0) + 1
    assert by_len == {1: 4, 2: 12, 3: 24, 4: 24}
    line = graph_from_edges(3, [(0, 1), (1, 2)])
    assert simple_paths(line, 3) == [
        (0,),
        (1,),
        (2,),
        (0, 1),
        (1, 0),
        (1, 2),
        (2, 1),
        (0, 1, 2),
        (2, 1, 0),
    ]


def test_record_evolution_is_monotone_in_the_initial_set():
    rng = RngStream(31, 0)
    for _ in range(20):
        rec = build_graphical(K4, SimParams(0.6), 2.0, rng)
        small = evolve_from_record(rec, [0])
        large = evolve_from_record(rec, [0, 2])
        for t in (0.5, 1.0, 2.0):
            assert small(t) <= large(t)


def test_record_evolution_rejects_out_of_range_queries():
    rec = build_graphical(K2, SimParams(0.5), 1.0, RngStream(2, 0))
    ev = evolve_from_record(rec, [0])
    with pytest.raises(ValueError):
        ev(1.5)
    with pytest.raises(ValueError):
        evolve_from_record(rec, [9])


def test_build_graphical_enforces_its_event_budget():
    with pytest.raises(BudgetError):
        build_graphical(K4, SimParams(2.0), 1e5, RngStream(0, 0), event_budget=100)
