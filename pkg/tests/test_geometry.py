from __future__ import annotations

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypercp.geometry import (
    GraphParams,
    HalfPlanePoint,
    PolarPoint,
    adjacent,
    dist_x,
    expected_degree,
    height_for_degree,
    hyperbolic_distance,
    map_disk_to_halfplane,
)

alphas = st.floats(min_value=0.51, max_value=0.99)


def test_expected_degree_at_ground_level():
    # D(0) = 1 / (alpha - 1/2)
    assert expected_degree(0.0, 0.75) == pytest.approx(4.0)
    assert expected_degree(0.0, 0.6) == pytest.approx(10.0)


def test_expected_degree_doubles_every_two_log_units():
    d0 = expected_degree(1.0, 0.8)
    d1 = expected_degree(1.0 + 2.0 * math.log(2.0), 0.8)
    assert d1 == pytest.approx(2.0 * d0)


@given(alphas, st.floats(min_value=1e-3, max_value=1e6))
@settings(max_examples=50, deadline=None)
def test_height_degree_round_trip(alpha, d):
    h = height_for_degree(d, alpha)
    assert expected_degree(h, alpha) == pytest.approx(d, rel=1e-9)


def test_height_for_degree_nonnegative_flag():
    # small target degrees sit below ground level
    assert height_for_degree(1.0, 0.75) < 0.0
    with pytest.raises(ValueError):
        height_for_degree(1.0, 0.75, require_nonnegative=True)


def test_hyperbolic_distance_matches_law_of_cosines():
    u = PolarPoint(r=1.0, theta=0.0)
    v = PolarPoint(r=2.0, theta=1.0)
    want = math.acosh(
        math.cosh(1.0) * math.cosh(2.0) - math.sinh(1.0) * math.sinh(2.0) * math.cos(1.0)
    )
    assert hyperbolic_distance(u, v) == pytest.approx(want)


@given(
    st.floats(min_value=0.0, max_value=20.0),
    st.floats(min_value=0.0, max_value=20.0),
    st.floats(min_value=-math.pi, max_value=math.pi),
)
@settings(max_examples=50, deadline=None)
def test_hyperbolic_distance_symmetric(r1, r2, dtheta):
    u = PolarPoint(r=r1, theta=0.0)
    v = PolarPoint(r=r2, theta=dtheta)
    assert hyperbolic_distance(u, v) == pytest.approx(hyperbolic_distance(v, u))


@given(st.floats(min_value=0.0, max_value=5.0))
@settings(max_examples=50, deadline=None)
def test_hyperbolic_distance_to_self_is_tiny(r):
    # the law-of-cosines form loses precision near zero: cosh^2 - sinh^2
    # evaluates with absolute error ~ cosh(r)^2 * eps, so only a loose band
    # makes sense here
    u = PolarPoint(r=r, theta=0.3)
    assert hyperbolic_distance(u, u) == pytest.approx(0.0, abs=1e-4)


def test_disk_to_halfplane_known_point():
    # radius R = 2 log n; angle theta maps to x = theta * n / 2, depth to h = R - r
    p = map_disk_to_halfplane(PolarPoint(r=9.0, theta=0.1), n=100.0)
    assert p.x == pytest.approx(5.0)
    assert p.h == pytest.approx(2.0 * math.log(100.0) - 9.0)


def test_adjacency_threshold_is_sharp():
    # reach at heights (2, 2) is e^{(2+2)/2} = e^2
    lim = math.e**2
    a = HalfPlanePoint(x=0.0, h=2.0)
    assert adjacent(a, HalfPlanePoint(x=lim - 1e-9, h=2.0))
    assert not adjacent(a, HalfPlanePoint(x=lim + 1e-3, h=2.0))


@given(
    st.floats(min_value=-50.0, max_value=50.0),
    st.floats(min_value=0.0, max_value=8.0),
    st.floats(min_value=-50.0, max_value=50.0),
    st.floats(min_value=0.0, max_value=8.0),
)
@settings(max_examples=50, deadline=None)
def test_adjacency_symmetric(x1, h1, x2, h2):
    u = HalfPlanePoint(x=x1, h=h1)
    v = HalfPlanePoint(x=x2, h=h2)
    assert adjacent(u, v) == adjacent(v, u)


def test_dist_x_wraps_around_the_seam():
    assert dist_x(-4.0, 4.0, circumference=10.0) == pytest.approx(2.0)
    assert dist_x(-4.0, 4.0) == pytest.approx(8.0)
    assert dist_x(1.0, 1.0, circumference=10.0) == 0.0


@given(st.floats(min_value=-20.0, max_value=20.0), st.floats(min_value=-20.0, max_value=20.0))
@settings(max_examples=50, deadline=None)
def test_dist_x_wrapped_never_exceeds_half_circumference(a, b):
    c = 12.0
    d = dist_x(a, b, circumference=c)
    assert 0.0 <= d <= c / 2.0 + 1e-12


def test_graph_params_validates_alpha():
    with pytest.raises(ValueError, match=r"\(1/2, 1\)"):
        GraphParams(alpha=1.2, n=100.0)
    with pytest.raises(ValueError, match=r"\(1/2, 1\)"):
        GraphParams(alpha=0.5, n=100.0)
    GraphParams(alpha=0.75, n=100.0)
