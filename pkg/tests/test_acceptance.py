"""End-to-end acceptance suite: one test, one verdict per numbered check.

Each test states its tolerances inline and fails with the measured numbers
when a clause is out of band.  Three clauses are known to fail at this
desk scale (the rate grids sit above the small-rate asymptotic regime and
one closed-form occupancy estimate disagrees with the integrated box
mass); those tests fail plainly with the measurement and the cause in the
message rather than being skipped or loosened.

Budget notes: tests 05-07 dominate the runtime (roughly 15-20 minutes
each, single core); everything else finishes in seconds.  The escape
proxy can never fire on half-width-30000 windows (root hop eccentricity
stays below the radius), so the mass caps are sized to carry the survival
verdict instead: well above any extinct run's footprint, far below the
window population.
"""

from __future__ import annotations

import math

import numpy as np

from hypercp import experiments as ex
from hypercp.contact import (
    SimParams,
    StopRule,
    batch_extinction,
    build_graphical,
    count_traces,
    simple_paths,
)
from hypercp.exact_oracle import exact_expected_extinction_time, exact_extinction_probability
from hypercp.geometry import GraphParams
from hypercp.graph import build_adjacency, graph_from_edges
from hypercp.sampler import RngStream, Window, sample_window
from hypercp.tessellation import build_grid, check_box_adjacency, ladder_boxes

CONNECTED_SMALL_GRAPHS = {
    "single": (1, ()),
    "edge": (2, ((0, 1),)),
    "path3": (3, ((0, 1), (1, 2))),
    "triangle": (3, ((0, 1), (1, 2), (0, 2))),
    "path4": (4, ((0, 1), (1, 2), (2, 3))),
    "star4": (4, ((0, 1), (0, 2), (0, 3))),
    "paw": (4, ((0, 1), (1, 2), (0, 2), (2, 3))),
    "cycle4": (4, ((0, 1), (1, 2), (2, 3), (0, 3))),
    "diamond": (4, ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3))),
    "complete4": (4, ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))),
}

RATE_GRID = (0.4, 0.3, 0.2, 0.15, 0.1)


def test_01_small_graph_extinction_matches_exact_law():
    trials = 100_000
    rng = RngStream(2101, 0)
    checked = 0
    bad = []
    for name, (nv, edges) in CONNECTED_SMALL_GRAPHS.items():
        g = graph_from_edges(nv, list(edges))
        for lam in (0.2, 0.5, 1.0):
            for t in (0.5, 2.0):
                exact = exact_extinction_probability(g, range(nv), lam, t)
                extinct, _ = batch_extinction(g, range(nv), SimParams(lam), t, trials, rng)
                mc = extinct / trials
                se = math.sqrt(exact * (1.0 - exact) / trials)
                checked += 1
                if abs(mc - exact) > 4.0 * se:
                    bad.append(
                        f"  {name} lam={lam} t={t}: mc={mc:.5f} exact={exact:.5f} "
                        f"dev={abs(mc - exact) / se:.1f} se"
                    )
    assert checked == 60
    assert not bad, "extinction probability off by more than 4 se:\n" + "\n".join(bad)


def test_02_pair_extinction_time_matches_first_step_solve():
    lam, trials, horizon = 1.0, 100_000, 1000.0
    g = graph_from_edges(2, [(0, 1)])
    exact = exact_expected_extinction_time(g, [0, 1], lam)
    assert abs(exact - (1.5 + 0.5 * lam)) < 1e-9
    extinct, time_sum = batch_extinction(g, [0, 1], SimParams(lam), horizon, trials, RngStream(2102, 0))
    assert extinct == trials, f"{trials - extinct} runs outlived the {horizon} horizon"
    mean = time_sum / trials
    assert abs(mean - exact) <= 0.02 * exact, (
        f"mean extinction time {mean:.4f} differs from {exact} by more than 2%"
    )


def test_03_trace_frequency_respects_rate_power_bound():
    lam, horizon, n_records, chunk = 0.2, 10.0, 100_000, 10_000
    g = graph_from_edges(4, list(CONNECTED_SMALL_GRAPHS["complete4"][1]))
    paths = simple_paths(g, 4)
    assert len(paths) == 64
    p = SimParams(lam)
    rng = RngStream(2103, 0)
    hits = dict.fromkeys(paths, 0)
    done = 0
    while done < n_records:
        records = [build_graphical(g, p, horizon, rng) for _ in range(chunk)]
        for path in paths:
            hits[path] += count_traces(records, path)
        done += chunk
    bad = []
    for path in paths:
        emp = hits[path] / n_records
        bound = (2.0 * lam) ** (len(path) - 1)
        se = math.sqrt(max(emp * (1.0 - emp), 1.0 / n_records) / n_records)
        if emp > bound + 3.0 * se:
            bad.append(f"  {list(path)}: empirical {emp:.5f} > bound {bound:.5f} + 3 se")
    assert not bad, "trace frequency above (2 lam)^jumps:\n" + "\n".join(bad)


def test_04_degree_tail_exponent_tracks_alpha():
    bad = []
    for alpha, chi in ((0.6, 2.2), (0.75, 2.5), (0.9, 2.8)):
        g = ex.sample_wrapped_graph(2e5, alpha, RngStream(4000 + int(alpha * 100), 0))
        fit = ex.degree_tail_fit(g, RngStream(4100 + int(alpha * 100), 0), bootstrap=100)
        if abs(fit.exponent - chi) > 0.25:
            bad.append(
                f"  alpha={alpha}: exponent {fit.exponent:.3f} outside {chi} +- 0.25 "
                f"(ci {fit.ci_low:.3f}-{fit.ci_high:.3f}, d_min={fit.d_min}, tail={fit.tail_size})"
            )
    assert not bad, "degree tail exponent off:\n" + "\n".join(bad)


def _survival_grid(alpha, trials_per_point, mass_cap, seed):
    window = Window(-30000.0, 30000.0)
    stop = StopRule(t_max=1e4, escape_radius=20, mass_cap=mass_cap)
    return [
        ex.estimate_gamma(alpha, lam, trials_per_point[k], window, stop, RngStream(seed, k))
        for k, lam in enumerate(RATE_GRID)
    ]


def _grid_detail(points):
    return "\n".join(
        f"  lam={p.lam}: estimate={p.estimate:.4f} ({p.survivals}/{p.trials}, "
        f"wilson {p.wilson_low:.4f}-{p.wilson_high:.4f})"
        for p in points
    )


def test_05_survival_scaling_low_alpha():
    points = _survival_grid(0.6, (2000,) * 5, 8000, 7006)
    fit = ex.fit_exponent(points, 0.6)
    ests = [p.estimate for p in points]
    monotone = all(a >= b for a, b in zip(ests, ests[1:]))
    in_band = 0.9 <= fit.plain_slope <= 1.6
    assert monotone and in_band, (
        f"survival scaling at alpha=0.6 (theory slope {fit.theory_slope}):\n"
        f"{_grid_detail(points)}\n"
        f"  monotone nonincreasing toward small rates: {monotone}\n"
        f"  plain log-log slope {fit.plain_slope:.3f} in [0.9, 1.6]: {in_band}\n"
        "  cause: this rate grid sits above the small-rate asymptotic regime; the "
        "local slope (~0.44-0.49) stayed put while the window half-width varied "
        "over 3e3-3e4, so the shortfall is preasymptotic saturation of the "
        "estimates, not window truncation."
    )


def test_06_survival_scaling_high_alpha():
    points = _survival_grid(0.9, (2000, 2000, 3000, 4000, 6000), 2000, 7009)
    fit = ex.fit_exponent(points, 0.9)
    slope_ok = 2.0 <= fit.corrected_slope <= 3.2
    residual_ok = fit.corrected_residual <= fit.plain_residual
    assert slope_ok and residual_ok, (
        f"survival scaling at alpha=0.9 (theory slope {fit.theory_slope}):\n"
        f"{_grid_detail(points)}\n"
        f"  corrected slope {fit.corrected_slope:.3f} in [2.0, 3.2]: {slope_ok}\n"
        f"  corrected residual {fit.corrected_residual:.4f} <= plain "
        f"{fit.plain_residual:.4f}: {residual_ok}\n"
        "  cause: the slowly-varying correction assumes extra suppression toward "
        "small rates, but at this scale the measured estimates flatten there "
        "instead, so the correction adds curvature and the linear fit degrades; "
        "the slope stays near half the asymptotic value for the same "
        "preasymptotic reason as the low-alpha grid."
    )


def test_07_extinction_time_grows_with_size():
    rows = ex.metastability_scan(
        0.7, 1.0, [200.0, 400.0, 800.0, 1600.0], 200, 1e4, RngStream(2107, 0)
    )
    hit = [r.cap_hit_fraction for r in rows]
    med = [r.median_capped_time for r in rows]
    hit_nondecreasing = all(a <= b for a, b in zip(hit, hit[1:]))
    med_nondecreasing = all(a <= b for a, b in zip(med, med[1:]))
    final_ok = hit[-1] >= 0.9
    detail = "\n".join(
        f"  n={r.n:.0f}: median capped time={r.median_capped_time:.1f} "
        f"cap-hit fraction={r.cap_hit_fraction:.3f}"
        for r in rows
    )
    assert hit_nondecreasing and med_nondecreasing and final_ok, (
        f"extinction-time scan at alpha=0.7 lam=1:\n{detail}\n"
        f"  cap-hit fraction nondecreasing: {hit_nondecreasing}; median "
        f"nondecreasing: {med_nondecreasing}; cap-hit at n=1600 >= 0.9: {final_ok}"
    )


def test_08_late_time_density_matches_survival_estimate():
    window = Window(-30000.0, 30000.0)
    stop = StopRule(t_max=1e4, escape_radius=20, mass_cap=8000)
    gamma = ex.estimate_gamma(0.7, 2.0, 2000, window, stop, RngStream(5001, 0))
    den = ex.density_experiment(1e4, 0.7, 2.0, 50.0, 50, RngStream(5002, 0), gamma_ref=gamma)
    assert den.gap is not None and den.gap <= 0.05, (
        f"density {den.mean_density:.4f} (std {den.std_density:.4f}) vs survival "
        f"estimate {gamma.estimate:.4f}: gap {den.gap:.4f} > 0.05"
    )


def test_09_box_grid_adjacency_and_occupancy():
    grid = build_grid(1e4, 1.0, 0.75)
    pts = sample_window(ex.wrap_window(1e4), 0.75, RngStream(9001, 0))
    g = build_adjacency(pts, "wrap", GraphParams(alpha=0.75, n=1e4))
    chk = check_box_adjacency(grid, g)
    assert chk.clique_pairs > 0 and chk.cross_pairs > 0
    assert chk.clique_violations == 0 and chk.cross_violations == 0, (
        f"box adjacency audit on N={g.n_vertices}: "
        f"{chk.clique_violations}/{chk.clique_pairs} same-box pairs missing an edge, "
        f"{chk.cross_violations}/{chk.cross_pairs} parent-child pairs missing an edge"
    )
    survey = ex.tessellation_survey(1e4, 1.0, 0.75, 0.5, 1000, RngStream(9002, 0))
    # Every row mass at this scale is far below one, so the per-row frequency
    # bound below quantifies over nothing; assert that instead of letting the
    # loop pass silently.
    assert max(r.mean_mass for r in survey.rows) < 1.0
    bad = []
    for r in survey.rows:
        if r.mean_mass < 1.0:
            continue
        draws = r.boxes_per_sample * survey.samples
        se = math.sqrt(max(r.observed_good_fraction * (1 - r.observed_good_fraction), 1 / draws) / draws)
        if r.observed_good_fraction < r.good_lower_bound - 3.0 * se:
            bad.append(
                f"  row {r.row}: observed {r.observed_good_fraction:.4f} < "
                f"bound {r.good_lower_bound:.4f} - 3 se"
            )
    assert not bad, "good-box frequency under the bound:\n" + "\n".join(bad)
    print(
        f"backbone-connected fraction = {survey.connected_fraction:.3f}, "
        f"mean backbone vertex fraction = {survey.mean_backbone_vertex_fraction:.4f} "
        f"over {survey.samples} samples (threshold {survey.threshold})"
    )


def test_10_conditioned_layout_isolates_components():
    rep = ex.bad_event_check(1e4, 0.75, 0.2, 0.75, 100, RngStream(9003, 0))
    assert rep.all_ok, (
        f"conditioned-layout audit over {rep.trials} samples: "
        f"cross-gap edges={rep.cross_gap_edges}, misplaced points={rep.misplaced_points}, "
        f"max component={rep.max_component_size} vs bound {rep.component_bound} "
        f"(constant {rep.bound_constant:.2f} x n^(1-a)), masses "
        f"top {rep.top_mass:.3f}<={rep.top_bound:.3f} "
        f"strip {rep.strip_mass:.3f}<={rep.strip_bound:.3f} "
        f"gap {rep.gap_mass:.3f}<={rep.gap_bound:.3f}"
    )


def test_11_ladder_box_occupancy_and_leaf_support():
    d, alpha, samples, h_cap = 50, 0.8, 200, 40.0
    lad = ladder_boxes(d)
    rng = RngStream(9004, 0)
    nonempty = [0, 0, 0]
    leaf_hits = [0, 0, 0]
    for _ in range(samples):
        for k in range(3):
            upper = lad.upper_box(k)
            up_pts = sample_window(Window(upper.x_min, upper.x_max, upper.h_min, h_cap), alpha, rng)
            nonempty[k] += bool(len(up_pts))
            leaf = lad.leaf_box(k)
            ground = sample_window(leaf, alpha, rng)
            # A hub pinned at the box's x-center on level k reaches ground
            # points within exp((h_hub + h)/2); count its leaf support.
            count = 0
            if len(ground):
                reach = np.exp(0.5 * (lad.level_height(k) + ground[:, 1]))
                count = int((np.abs(ground[:, 0] - 0.5 * (leaf.x_min + leaf.x_max)) <= reach).sum())
            leaf_hits[k] += count >= d
    occupancy_bad = []
    detail = []
    for k in range(3):
        emp = nonempty[k] / samples
        claimed = lad.nonempty_probability_estimate(k, alpha)
        mass = lad.upper_mass(k, alpha)
        integral = 1.0 - math.exp(-mass)
        se = math.sqrt(max(emp * (1.0 - emp), 1.0 / samples) / samples)
        detail.append(
            f"  k={k}: empirical {emp:.3f}, closed-form estimate {claimed:.3f}, "
            f"integrated mass {mass:.3f} -> occupancy {integral:.3f}, 3 se = {3 * se:.3f}"
        )
        if abs(emp - claimed) > 3.0 * se:
            occupancy_bad.append(k)
        assert abs(emp - integral) <= 3.0 * se, detail[-1]
    leaf_fracs = [c / samples for c in leaf_hits]
    leaf_monotone = leaf_fracs[0] <= leaf_fracs[1] <= leaf_fracs[2]
    assert not occupancy_bad and leaf_monotone, (
        "ladder occupancy at d=50, alpha=0.8:\n" + "\n".join(detail) + "\n"
        f"  levels where the closed-form estimate missed by more than 3 se: {occupancy_bad}\n"
        f"  leaf-support fractions {[f'{v:.3f}' for v in leaf_fracs]} nondecreasing: {leaf_monotone}\n"
        "  cause: the empirical frequencies match the directly integrated box "
        "masses, so the closed-form estimate itself overstates the mass by a "
        "constant factor (pi/alpha * e, about 10.7 here) at every level."
    )


def test_12_star_extinction_time_and_persistence():
    lam, probe_time = 0.1, 50.0
    rows = ex.star_time_scan(lam, [200, 400, 800, 1600], 200, 1e4, RngStream(77, 0), probe_time=probe_time)
    medians = [r.median_capped_time for r in rows]
    strictly_up = all(a < b for a, b in zip(medians, medians[1:]))
    top = rows[-1]
    threshold = 0.2 * lam * top.degree
    frac = sum(c > threshold for c in top.probe_counts) / top.trials
    detail = "\n".join(
        f"  d={r.degree}: median capped time={r.median_capped_time:.1f} "
        f"cap-hit={r.cap_hit_fraction:.2f} mean count@{probe_time:.0f}={r.probe_mean_count:.1f}"
        for r in rows
    )
    assert strictly_up and frac >= 0.9, (
        f"star scan at lam={lam}:\n{detail}\n"
        f"  medians strictly increasing: {strictly_up}; fraction with count > "
        f"{threshold:.0f} at t={probe_time:.0f} on d={top.degree}: {frac:.3f} (need >= 0.9)"
    )
