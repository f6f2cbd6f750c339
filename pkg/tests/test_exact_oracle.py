from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from scipy.linalg import expm

from hypercp.errors import BudgetError, CapacityError
from hypercp.exact_oracle import (
    enumerate_path_families,
    exact_expected_extinction_time,
    exact_extinction_probability,
    path_weight_sum,
    threshold_heights,
)
from hypercp.geometry import height_for_degree
from hypercp.graph import graph_from_edges

K2 = graph_from_edges(2, [(0, 1)])
K3 = graph_from_edges(3, [(0, 1), (1, 2), (2, 0)])


def _dense_generator(g, lam):
    """Explicit dense generator over all 2^n infection sets, built separately
    from the solver's sparse construction."""
    n = g.n_vertices
    size = 1 << n
    q = np.zeros((size, size))
    for s in range(size):
        infected = [v for v in range(n) if s >> v & 1]
        for v in infected:
            t = s & ~(1 << v)
            q[s, t] += 1.0
        for v in infected:
            for w in g.neighbors(v):
                w = int(w)
                if not s >> w & 1:
                    q[s, s | 1 << w] += lam
        q[s, s] = -q[s].sum()
    return q


@pytest.mark.parametrize("lam,t", [(0.3, 0.7), (1.0, 2.0), (2.0, 0.5)])
def test_uniformization_matches_matrix_exponential_on_a_triangle(lam, t):
    q = _dense_generator(K3, lam)
    p = expm(q * t)
    s0 = (1 << 3) - 1
    want = p[s0, 0]
    got = exact_extinction_probability(K3, [0, 1, 2], lam, t)
    assert got == pytest.approx(want, abs=1e-9)


def test_uniformization_single_vertex_closed_form():
    g = graph_from_edges(1, [])
    for t in (0.1, 1.5, 4.0):
        assert exact_extinction_probability(g, [0], 0.7, t) == pytest.approx(
            1.0 - math.exp(-t), abs=1e-9
        )


def test_extinction_probability_edge_cases():
    assert exact_extinction_probability(K2, [], 1.0, 5.0) == 1.0
    assert exact_extinction_probability(K2, [0], 1.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        exact_extinction_probability(K2, [0], -1.0, 1.0)


def test_expected_time_pair_closed_form():
    # both endpoints of one edge infected: E[tau] = 3/2 + lam/2
    for lam in (0.0, 0.5, 1.0, 3.0):
        got = exact_expected_extinction_time(K2, [0, 1], lam)
        assert got == pytest.approx(1.5 + lam / 2.0, rel=1e-10)


def test_expected_time_single_seed_closed_form():
    # one endpoint infected: E[tau] = 1 + lam/2
    for lam in (0.0, 0.5, 2.0):
        got = exact_expected_extinction_time(K2, [0], lam)
        assert got == pytest.approx(1.0 + lam / 2.0, rel=1e-10)


def test_expected_time_matches_dense_linear_solve_on_a_triangle():
    lam = 0.8
    q = _dense_generator(K3, lam)
    a = -q[1:, 1:]
    times = np.linalg.solve(a, np.ones(a.shape[0]))
    s0 = (1 << 3) - 1
    assert exact_expected_extinction_time(K3, [0, 1, 2], lam) == pytest.approx(
        times[s0 - 1], rel=1e-9
    )


def test_expected_time_requires_a_nonempty_start():
    with pytest.raises(ValueError):
        exact_expected_extinction_time(K2, [], 1.0)


def test_state_cap_guards_the_state_space():
    big = graph_from_edges(13, [(i, i + 1) for i in range(12)])
    with pytest.raises(CapacityError):
        exact_extinction_probability(big, [0], 0.5, 1.0)
    with pytest.raises(CapacityError):
        exact_expected_extinction_time(big, [0], 0.5)


def test_path_families_on_a_triangle():
    fam = enumerate_path_families(K3, 0, avoid=(), max_len=3)
    assert fam.max_degree == 2
    assert fam.revisits == {
        3: [(0, 1, 2, 0), (0, 1, 2, 1), (0, 2, 1, 0), (0, 2, 1, 2)]
    }
    assert sorted(fam.bounces) == [
        (0, 1, 0, 1),
        (0, 1, 0, 2),
        (0, 2, 0, 1),
        (0, 2, 0, 2),
    ]
    assert fam.into_avoid == {}


def test_path_family_weights_match_hand_sums():
    fam = enumerate_path_families(K3, 0, avoid=(), max_len=3)
    lam = 0.2
    ws = path_weight_sum(fam, lam)
    # four walks of three jumps in each family, weight (2 lam)^3 apiece
    assert ws.revisits == pytest.approx(4 * (2 * lam) ** 3)
    assert ws.bounces == pytest.approx(4 * (2 * lam) ** 3)
    assert ws.into_avoid == 0
    # geometric tail of (max_degree * 2 lam)^k beyond the enumeration cutoff
    r = fam.max_degree * 2 * lam
    assert ws.truncation_tail == pytest.approx(r ** 4 / (1 - r))


def test_path_families_respect_the_avoid_set():
    # simple-path enumeration stops at the avoided vertex; only the
    # closed-form bounce family may still step into it afterwards
    fam = enumerate_path_families(K3, 0, avoid=(2,), max_len=3)
    assert fam.into_avoid == {1: [(0, 2)], 2: [(0, 1, 2)]}
    assert fam.revisits == {}
    assert all(walk[-1] == 2 for walk in itertools.chain(*fam.into_avoid.values()))
    assert sorted(fam.bounces) == [
        (0, 1, 0, 1),
        (0, 1, 0, 2),
        (0, 2, 0, 1),
        (0, 2, 0, 2),
    ]


def test_path_enumeration_budget():
    # the complete graph on four vertices has 16 simple prefixes from a root
    k4 = graph_from_edges(4, [(a, b) for a in range(4) for b in range(a + 1, 4)])
    with pytest.raises(BudgetError):
        enumerate_path_families(k4, 0, avoid=(), max_len=3, node_budget=10)
    enumerate_path_families(k4, 0, avoid=(), max_len=3, node_budget=16)


def test_threshold_heights_track_their_degree_scales():
    th = threshold_heights(0.1, 0.75)
    assert th.star_height == pytest.approx(height_for_degree(0.1**-2, 0.75))
    assert th.near_star_height == pytest.approx(height_for_degree(0.1**-1.9, 0.75))
    assert th.log_star_height == pytest.approx(
        height_for_degree(0.05 * 0.1**-2 * math.log(10.0), 0.75)
    )
    assert th.seed_height == pytest.approx(math.log(100.0) / 0.25)
    assert th.ladder_degree == pytest.approx(10.0 * math.log(10.0) / 0.01)
    assert th.ladder_base_height == pytest.approx(2.0 * math.log(2.0 * th.ladder_degree))
    assert th.ordering_holds == (
        th.near_star_height < th.star_height < th.log_star_height
    )


def test_threshold_heights_ordering_flips_at_small_rates():
    # delta log(1/lam) crosses one near lam = e^{-20} for delta = 0.05
    assert not threshold_heights(0.1, 0.75).ordering_holds
    assert threshold_heights(1e-10, 0.75).ordering_holds


def test_threshold_heights_domain_checks():
    with pytest.raises(ValueError):
        threshold_heights(0.5, 0.75)
    with pytest.raises(ValueError):
        threshold_heights(0.1, 0.4)
    with pytest.raises(ValueError):
        threshold_heights(0.1, 0.75, sigma=1.5)
