"""Monte Carlo campaign drivers.

Each function here runs one survey end to end: survival-probability
estimation on truncated half-plane samples, power-law fits of the survival
exponent, extinction-time scans on the wrapped model, late-time density
versus survival probability, conditioned sparse-layout audits, degree-tail
fits, star persistence scans, and box-grid classification frequencies.
Shared plumbing (config parsing, CSV/JSON emission, Wilson intervals,
deterministic per-trial seeding) lives here too so the command line front
end stays thin.

Reproducibility contract: every driver takes an RngStream and derives one
64-bit seed per trial up front, so results are independent of chunking and
thread count, and a rerun with the same config and master seed is
bit-identical.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import _kernels
from .contact import SimParams, StopRule, extinction_time_full, simulate
from .geometry import GraphParams
from .graph import Graph, build_adjacency, components, make_star
from .sampler import Region, RngStream, Window, region_mass, sample_conditioned, sample_root, sample_window
from .tessellation import box_mean_mass, build_grid, classify_points, good_prob_lower_bound

__all__ = [
    "DEFAULT_LAMBDA_GRID",
    "GammaEstimate",
    "ExponentFit",
    "ScanRow",
    "DensityResult",
    "BadEventLayout",
    "BadEventReport",
    "DegreeTailFit",
    "StarScanRow",
    "TessRowStat",
    "TessellationSurvey",
    "wilson_interval",
    "wrap_window",
    "sample_wrapped_graph",
    "residual_mass",
    "default_gamma_window",
    "default_gamma_stop",
    "estimate_gamma",
    "fit_exponent",
    "metastability_scan",
    "density_experiment",
    "bad_event_layout",
    "bad_event_check",
    "degree_tail_fit",
    "star_time_scan",
    "tessellation_survey",
    "parse_config",
    "write_csv",
    "write_summary",
]

logger = logging.getLogger(__name__)

#: Default infection-rate grid for exponent studies: wide enough to show the
#: power law, large enough that survival counts stay nonzero at <= 10^4 trials.
DEFAULT_LAMBDA_GRID = (0.4, 0.3, 0.2, 0.15, 0.1)

_Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    if not 0 <= successes <= trials:
        raise ValueError(f"successes {successes} outside [0, {trials}]")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def _spawn_seeds(rng: RngStream, count: int) -> np.ndarray:
    """One independent 64-bit seed per trial, drawn up front from the master stream."""
    return rng.gen.integers(0, 1 << 64, size=count, dtype=np.uint64)


def _chunks(trials: int, threads: int) -> list[np.ndarray]:
    parts = max(1, min(int(threads), trials))
    return [c for c in np.array_split(np.arange(trials), parts) if len(c)]


def _parallel(fn, chunks: list[np.ndarray], threads: int) -> list:
    if threads <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def wrap_window(n: float) -> Window:
    """Rectangle carrying the finite model at scale n: width pi*n, height 2 log n."""
    return Window(-math.pi * n / 2.0, math.pi * n / 2.0, 0.0, 2.0 * math.log(n))


def sample_wrapped_graph(n: float, alpha: float, stream: RngStream) -> Graph:
    """One finite-model sample: points on the wrap rectangle, circular adjacency."""
    params = GraphParams(alpha=alpha, n=float(n))
    pts = sample_window(wrap_window(n), alpha, stream)
    return build_adjacency(pts, mode="wrap", params=params)


# ---------------------------------------------------------------------------
# Survival probability on the truncated half-plane
# ---------------------------------------------------------------------------


def residual_mass(window: Window, alpha: float) -> float:
    """Intensity mass of the half-plane strip above the window's height cap.

    This is the part of the root's ambient environment the truncation throws
    away; it must be small for the windowed graph to stand in for the
    infinite one.
    """
    if math.isinf(window.h_max):
        return 0.0
    return (window.width / math.pi) * math.exp(-alpha * window.h_max)


def default_gamma_window(half_width: float = 30000.0, h_cap: float = math.inf) -> Window:
    return Window(-half_width, half_width, 0.0, h_cap)


def default_gamma_stop(
    t_max: float = 1e4, escape_radius: int | None = 20, mass_cap: int | None = 100000
) -> StopRule:
    return StopRule(t_max=t_max, escape_radius=escape_radius, mass_cap=mass_cap)


@dataclass(frozen=True)
class GammaEstimate:
    """Monte Carlo estimate of the root's survival probability at one rate.

    ``escape_unreachable_fraction`` is a proxy diagnostic: the fraction of
    trials whose root component has hop eccentricity below the escape
    radius, so the escape rule could never have fired and the mass cap (or
    the horizon) had to carry the survival verdict.
    """

    lam: float
    alpha: float
    trials: int
    survivals: int
    estimate: float
    wilson_low: float
    wilson_high: float
    window: Window
    stop: StopRule
    residual_mass: float
    verdict_counts: dict = field(default_factory=dict)
    escape_unreachable_fraction: float = 0.0


def estimate_gamma(
    alpha: float,
    lam: float,
    trials: int,
    window: Window,
    stop: StopRule,
    rng: RngStream,
    threads: int = 1,
) -> GammaEstimate:
    """Fresh graph and root per trial; survival verdict per the stop rule."""
    params = GraphParams(alpha=alpha)
    sim = SimParams(lam)
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    if not window.x_min < 0.0 < window.x_max:
        raise ValueError("window must contain the root column x=0")
    if window.h_min != 0.0:
        raise ValueError(f"window must start at height 0, got h_min={window.h_min}")
    resid = residual_mass(window, alpha)
    if not resid < 0.01:
        raise ValueError(
            f"window residual mass {resid:.4g} is not < 0.01; raise h_cap or shrink the width"
        )
    seeds = _spawn_seeds(rng, trials)

    def run(chunk: np.ndarray) -> tuple[int, dict, int]:
        survivals = 0
        counts: dict[str, int] = {}
        unreachable = 0
        for i in chunk:
            stream = RngStream(int(seeds[i]), 0)
            root_h = sample_root(alpha, stream).h
            pts = sample_window(window, alpha, stream)
            all_pts = np.empty((len(pts) + 1, 2))
            all_pts[0, 0] = 0.0
            all_pts[0, 1] = root_h
            all_pts[1:] = pts
            g = build_adjacency(all_pts, mode="inf", params=params, root_id=0)
            if stop.escape_radius is not None:
                dist = _kernels.bfs_distances(g.indptr, g.indices, 0)
                if dist.max() < stop.escape_radius:
                    unreachable += 1
            res = simulate(g, [0], sim, stop, stream)
            counts[res.verdict] = counts.get(res.verdict, 0) + 1
            survivals += res.survived
        return survivals, counts, unreachable

    survivals = 0
    verdicts: dict[str, int] = {}
    unreachable = 0
    for got, counts, unr in _parallel(run, _chunks(trials, threads), threads):
        survivals += got
        unreachable += unr
        for k, v in counts.items():
            verdicts[k] = verdicts.get(k, 0) + v
    lo, hi = wilson_interval(survivals, trials)
    return GammaEstimate(
        lam=lam,
        alpha=alpha,
        trials=trials,
        survivals=survivals,
        estimate=survivals / trials,
        wilson_low=lo,
        wilson_high=hi,
        window=window,
        stop=stop,
        residual_mass=resid,
        verdict_counts=dict(sorted(verdicts.items())),
        escape_unreachable_fraction=unreachable / trials,
    )


# ---------------------------------------------------------------------------
# Exponent fits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares fits of log survival probability against log rate.

    The plain fit regresses log g on log lam.  The corrected fit first adds
    (2*alpha - 1) * log log(1/lam) to log g, which removes the slowly
    varying factor expected in the high-alpha regime; both are always
    reported so their residuals can be compared.  ``regime`` is 1 when
    alpha <= 3/4 (theory slope 1/(2 - 2*alpha)) and 2 otherwise (theory
    slope 4*alpha - 1).
    """

    alpha: float
    lams: tuple[float, ...]
    gammas: tuple[float, ...]
    regime: int
    theory_slope: float
    plain_slope: float
    plain_intercept: float
    plain_residual: float
    corrected_slope: float
    corrected_intercept: float
    corrected_residual: float


def _lsq_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sum((y - (slope * x + intercept)) ** 2))
    return float(slope), float(intercept), resid


def fit_exponent(points: Iterable, alpha: float) -> ExponentFit:
    """Fit the survival-probability exponent from (rate, estimate) points.

    ``points`` may be GammaEstimate records or plain (lam, gamma) pairs.
    """
    GraphParams(alpha=alpha)
    pairs = []
    for p in points:
        if isinstance(p, GammaEstimate):
            pairs.append((p.lam, p.estimate))
        else:
            lam, gam = p
            pairs.append((float(lam), float(gam)))
    if len(pairs) < 4:
        raise ValueError(f"need at least 4 points for a fit, got {len(pairs)}")
    for lam, gam in pairs:
        if gam <= 0.0:
            raise ValueError(
                f"survival estimate is 0 at lam={lam}; increase trials before fitting"
            )
        if not 0.0 < lam < 1.0:
            raise ValueError(f"rates must lie in (0, 1) for the corrected fit, got {lam}")
    lams = np.array([p[0] for p in pairs])
    gams = np.array([p[1] for p in pairs])
    x = np.log(lams)
    y = np.log(gams)
    plain = _lsq_line(x, y)
    corr = _lsq_line(x, y + (2.0 * alpha - 1.0) * np.log(np.log(1.0 / lams)))
    regime = 1 if alpha <= 0.75 else 2
    theory = 1.0 / (2.0 - 2.0 * alpha) if regime == 1 else 4.0 * alpha - 1.0
    return ExponentFit(
        alpha=alpha,
        lams=tuple(float(v) for v in lams),
        gammas=tuple(float(v) for v in gams),
        regime=regime,
        theory_slope=theory,
        plain_slope=plain[0],
        plain_intercept=plain[1],
        plain_residual=plain[2],
        corrected_slope=corr[0],
        corrected_intercept=corr[1],
        corrected_residual=corr[2],
    )


# ---------------------------------------------------------------------------
# Extinction-time scans on the wrapped model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScanRow:
    """One size point of an extinction-time scan (times capped at ``cap``)."""

    n: float
    trials: int
    cap: float
    median_capped_time: float
    cap_hit_fraction: float


def metastability_scan(
    alpha: float,
    lam: float,
    sizes: Sequence[float],
    trials: int,
    cap: float,
    rng: RngStream,
    engine: str = "auto",
    threads: int = 1,
) -> list[ScanRow]:
    """All-infected extinction times on wrapped samples of increasing size."""
    sim = SimParams(lam)
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    if not cap > 0:
        raise ValueError(f"cap must be positive, got {cap}")
    sizes = [float(s) for s in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"sizes must be strictly ascending, got {sizes}")
    stop = StopRule(t_max=cap)
    rows = []
    for n in sizes:
        seeds = _spawn_seeds(rng, trials)

        def run(chunk: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            taus = np.empty(len(chunk))
            hits = np.zeros(len(chunk), dtype=bool)
            for j, i in enumerate(chunk):
                stream = RngStream(int(seeds[i]), 0)
                g = sample_wrapped_graph(n, alpha, stream)
                if g.n_vertices == 0:
                    taus[j] = 0.0
                    continue
                res = extinction_time_full(g, sim, stop, stream, engine=engine)
                hits[j] = res.survived
                taus[j] = cap if res.survived else res.extinction_time
            return taus, hits

        parts = _parallel(run, _chunks(trials, threads), threads)
        taus = np.concatenate([p[0] for p in parts])
        hits = np.concatenate([p[1] for p in parts])
        rows.append(
            ScanRow(
                n=n,
                trials=trials,
                cap=cap,
                median_capped_time=float(np.median(taus)),
                cap_hit_fraction=float(hits.mean()),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Late-time density versus survival probability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityResult:
    """Mean infected fraction at one observation time on wrapped samples."""

    n: float
    alpha: float
    lam: float
    t_n: float
    trials: int
    mean_density: float
    std_density: float
    densities: tuple[float, ...]
    gamma_ref: float | None = None
    gap: float | None = None


def density_experiment(
    n: float,
    alpha: float,
    lam: float,
    t_n: float,
    trials: int,
    rng: RngStream,
    gamma_ref: GammaEstimate | float | None = None,
    engine: str = "auto",
    threads: int = 1,
) -> DensityResult:
    """Start all-infected on fresh wrapped samples, read the density at t_n.

    The observation time must sit below the metastability cap seen for this
    (n, lam) or the density collapses for the trivial reason; pick it from a
    scan.  Passing a survival estimate at the same (alpha, lam), either the
    full record or just its point value, fills in the comparison gap.
    """
    sim = SimParams(lam)
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    if t_n < 0:
        raise ValueError(f"observation time must be >= 0, got {t_n}")
    stop = StopRule(t_max=t_n if t_n > 0 else 1e-9)
    seeds = _spawn_seeds(rng, trials)

    def run(chunk: np.ndarray) -> np.ndarray:
        dens = np.empty(len(chunk))
        for j, i in enumerate(chunk):
            stream = RngStream(int(seeds[i]), 0)
            g = sample_wrapped_graph(n, alpha, stream)
            if g.n_vertices == 0:
                raise ValueError(f"sampled an empty graph at n={n}; increase n")
            res = simulate(
                g,
                np.arange(g.n_vertices),
                sim,
                stop,
                stream,
                sample_times=[t_n],
                engine=engine,
            )
            dens[j] = res.trajectory[0, 1] / g.n_vertices
        return dens

    parts = _parallel(run, _chunks(trials, threads), threads)
    dens = np.concatenate(parts)
    mean = float(dens.mean())
    ref = gamma_ref.estimate if isinstance(gamma_ref, GammaEstimate) else gamma_ref
    return DensityResult(
        n=float(n),
        alpha=alpha,
        lam=lam,
        t_n=float(t_n),
        trials=trials,
        mean_density=mean,
        std_density=float(dens.std(ddof=1)) if trials > 1 else 0.0,
        densities=tuple(float(v) for v in dens),
        gamma_ref=ref,
        gap=None if ref is None else abs(mean - ref),
    )


# ---------------------------------------------------------------------------
# Conditioned sparse layout: strips, gaps, and component bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BadEventLayout:
    """Evenly spaced forbidden strips on the wrapped rectangle.

    ``n_strips`` centers sit ``spacing`` apart (spacing ~ n^(1-a)); each
    strip has width n^epsilon and reaches up to the cutoff height
    epsilon * log n; the region above the cutoff is forbidden outright.
    The surviving gaps all have the same width.  Gap index k names the gap
    left of strip k; the two arcs flanking the wrap seam form one gap.
    """

    n: float
    a: float
    epsilon: float
    alpha: float
    n_strips: int
    spacing: float
    strip_width: float
    cutoff_height: float
    circumference: float

    @property
    def gap_width(self) -> float:
        return self.spacing - self.strip_width

    def strip_center(self, k: int) -> float:
        return -self.circumference / 2.0 + (k + 0.5) * self.spacing

    def forbidden_region(self) -> Region:
        top = Window(
            -self.circumference / 2.0,
            self.circumference / 2.0,
            self.cutoff_height,
            2.0 * math.log(self.n),
        )
        strips = tuple(
            Window(
                self.strip_center(k) - self.strip_width / 2.0,
                self.strip_center(k) + self.strip_width / 2.0,
                0.0,
                self.cutoff_height,
            )
            for k in range(self.n_strips)
        )
        return Region(windows=(top,) + strips)

    def gap_ids(self, xs: np.ndarray, hs: np.ndarray) -> np.ndarray:
        """Gap index per point; -1 for points inside a strip or above the cutoff."""
        offset = np.asarray(xs) + self.circumference / 2.0
        cell = np.floor(offset / self.spacing).astype(np.int64)
        cell = np.clip(cell, 0, self.n_strips - 1)
        frac = offset - cell * self.spacing
        half_gap = self.gap_width / 2.0
        out = np.full(np.shape(offset), -1, dtype=np.int64)
        left = frac < half_gap
        right = frac >= self.spacing - half_gap
        out[left] = cell[left]
        out[right] = (cell[right] + 1) % self.n_strips
        out[np.asarray(hs) >= self.cutoff_height] = -1
        return out

    @property
    def top_mass(self) -> float:
        return region_mass(
            Window(0.0, self.circumference, self.cutoff_height, 2.0 * math.log(self.n)),
            self.alpha,
        )

    @property
    def strip_mass(self) -> float:
        return region_mass(Window(0.0, self.strip_width, 0.0, self.cutoff_height), self.alpha)

    @property
    def gap_mass(self) -> float:
        return region_mass(Window(0.0, self.gap_width, 0.0, self.cutoff_height), self.alpha)


def bad_event_layout(n: float, a: float, epsilon: float, alpha: float) -> BadEventLayout:
    GraphParams(alpha=alpha)
    if not 0.5 < a < 1.0:
        raise ValueError(f"a must lie in (1/2, 1), got {a}")
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if not a + epsilon < 1.0:
        raise ValueError(f"need a + epsilon < 1, got {a + epsilon}")
    if n <= 1:
        raise ValueError(f"n must exceed 1, got {n}")
    circumference = math.pi * n
    spacing_target = n ** (1.0 - a)
    n_strips = max(1, math.floor(circumference / spacing_target))
    spacing = circumference / n_strips
    strip_width = n**epsilon
    if not strip_width < spacing:
        raise ValueError(
            f"strip width {strip_width:.4g} does not fit the spacing {spacing:.4g}; "
            "n is too small for this (a, epsilon)"
        )
    return BadEventLayout(
        n=float(n),
        a=a,
        epsilon=epsilon,
        alpha=alpha,
        n_strips=n_strips,
        spacing=spacing,
        strip_width=strip_width,
        cutoff_height=epsilon * math.log(n),
        circumference=circumference,
    )


@dataclass(frozen=True)
class BadEventReport:
    """Audit of conditioned samples against the layout's isolation claims.

    ``component_bound`` is the occupancy count that a per-gap Poisson tail
    bound exceeds with probability below 1 - confidence jointly over all
    gaps and trials; since components cannot cross gaps, it bounds the
    largest component on that same confidence.  ``bound_constant`` rescales
    it by n^(1-a).
    """

    layout: BadEventLayout
    trials: int
    confidence: float
    component_bound: int
    bound_constant: float
    max_component_size: int
    max_component_by_trial: tuple[int, ...]
    cross_gap_edges: int
    misplaced_points: int
    top_mass: float
    top_bound: float
    strip_mass: float
    strip_bound: float
    gap_mass: float
    gap_bound: float

    @property
    def masses_ok(self) -> bool:
        tol = 1.0 + 1e-12
        return (
            self.top_mass <= self.top_bound * tol
            and self.strip_mass <= self.strip_bound * tol
            and self.gap_mass <= self.gap_bound * tol
        )

    @property
    def components_ok(self) -> bool:
        return self.max_component_size <= self.component_bound

    @property
    def all_ok(self) -> bool:
        return (
            self.masses_ok
            and self.components_ok
            and self.cross_gap_edges == 0
            and self.misplaced_points == 0
        )


def bad_event_check(
    n: float,
    a: float,
    epsilon: float,
    alpha: float,
    trials: int,
    rng: RngStream,
    confidence: float = 0.999,
) -> BadEventReport:
    """Sample conditioned configurations and verify gap isolation claims."""
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must lie in (0, 1), got {confidence}")
    layout = bad_event_layout(n, a, epsilon, alpha)
    params = GraphParams(alpha=alpha, n=float(n))
    rect = wrap_window(n)
    forbidden = layout.forbidden_region()
    tail_budget = (1.0 - confidence) / (layout.n_strips * trials)
    component_bound = int(stats.poisson.isf(tail_budget, layout.gap_mass))
    seeds = _spawn_seeds(rng, trials)

    max_by_trial = []
    cross_edges = 0
    misplaced = 0
    for i in range(trials):
        stream = RngStream(int(seeds[i]), 0)
        pts = sample_conditioned(rect, forbidden, alpha, stream)
        if len(pts) == 0:
            max_by_trial.append(0)
            continue
        g = build_adjacency(pts, mode="wrap", params=params)
        comp_sizes = [len(c) for c in components(g)]
        max_by_trial.append(max(comp_sizes) if comp_sizes else 0)
        gid = layout.gap_ids(pts[:, 0], pts[:, 1])
        misplaced += int((gid < 0).sum())
        src, dst = g.directed_edges()
        cross_edges += int((gid[src] != gid[dst]).sum()) // 2
    return BadEventReport(
        layout=layout,
        trials=trials,
        confidence=confidence,
        component_bound=component_bound,
        bound_constant=component_bound / n ** (1.0 - a),
        max_component_size=max(max_by_trial),
        max_component_by_trial=tuple(max_by_trial),
        cross_gap_edges=cross_edges,
        misplaced_points=misplaced,
        top_mass=layout.top_mass,
        top_bound=n ** (1.0 - alpha * epsilon),
        strip_mass=layout.strip_mass,
        strip_bound=n**epsilon,
        gap_mass=layout.gap_mass,
        gap_bound=n ** (1.0 - a),
    )


# ---------------------------------------------------------------------------
# Degree-tail fit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DegreeTailFit:
    """Power-law tail exponent of a degree sample.

    Continuous maximum-likelihood estimate on degrees >= d_min with the
    half-integer shift, d_min chosen by minimizing the Kolmogorov-Smirnov
    distance over candidate thresholds, percentile bootstrap CI.
    """

    exponent: float
    d_min: int
    tail_size: int
    ks_distance: float
    ci_low: float
    ci_high: float
    bootstrap_samples: int


_MIN_TAIL = 100


def _tail_scan(degs: np.ndarray) -> tuple[float, int, int, float]:
    """Best (exponent, d_min, tail size, KS) over candidate thresholds."""
    xs = np.sort(degs[degs >= 1]).astype(np.float64)
    candidates = np.unique(xs)
    best = None
    for m in candidates:
        i0 = np.searchsorted(xs, m)
        tail = xs[i0:]
        nt = len(tail)
        if nt < _MIN_TAIL:
            break
        shift = m - 0.5
        denom = float(np.sum(np.log(tail / shift)))
        if denom <= 0.0:
            continue
        chi = 1.0 + nt / denom
        vals, cnts = np.unique(tail, return_counts=True)
        cdf_hi = np.cumsum(cnts) / nt
        cdf_lo = cdf_hi - cnts / nt
        model = 1.0 - ((vals - 0.5) / shift) ** (1.0 - chi)
        ks = float(np.maximum(np.abs(model - cdf_hi), np.abs(model - cdf_lo)).max())
        if best is None or ks < best[3]:
            best = (chi, int(m), nt, ks)
    if best is None:
        raise ValueError(
            f"fewer than {_MIN_TAIL} tail points at every candidate threshold; "
            "the sample is too small for a tail fit"
        )
    return best


def degree_tail_fit(g: Graph, rng: RngStream, bootstrap: int = 100) -> DegreeTailFit:
    """Fit the degree-tail exponent of a sampled graph (needs >= 10^4 vertices)."""
    if g.n_vertices < 10**4:
        raise ValueError(f"need at least 10^4 vertices, got {g.n_vertices}")
    if bootstrap < 0:
        raise ValueError(f"bootstrap count must be >= 0, got {bootstrap}")
    degs = g.degrees.astype(np.int64)
    chi, d_min, tail_size, ks = _tail_scan(degs)
    reps = []
    pool = degs[degs >= 1]
    for _ in range(bootstrap):
        idx = rng.gen.integers(0, len(pool), size=len(pool))
        try:
            reps.append(_tail_scan(pool[idx])[0])
        except ValueError:
            continue
    if reps:
        lo, hi = np.percentile(reps, [2.5, 97.5])
    else:
        lo = hi = chi
    return DegreeTailFit(
        exponent=chi,
        d_min=d_min,
        tail_size=tail_size,
        ks_distance=ks,
        ci_low=float(lo),
        ci_high=float(hi),
        bootstrap_samples=len(reps),
    )


# ---------------------------------------------------------------------------
# Star persistence scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StarScanRow:
    """Capped extinction times on one star, plus an optional probe readout.

    ``probe_alive_fraction`` is the fraction of trials still infected at the
    probe time; ``probe_mean_count`` the mean infected count there.
    """

    degree: int
    trials: int
    cap: float
    median_capped_time: float
    cap_hit_fraction: float
    probe_time: float | None = None
    probe_alive_fraction: float | None = None
    probe_mean_count: float | None = None
    probe_counts: tuple[int, ...] | None = None


def star_time_scan(
    lam: float,
    degrees: Sequence[int],
    trials: int,
    cap: float,
    rng: RngStream,
    probe_time: float | None = None,
    engine: str = "dynamic",
    threads: int = 1,
) -> list[StarScanRow]:
    """All-infected extinction times on stars of increasing degree.

    The dynamic engine is the default: star states are sparse for most of
    the run, which is exactly where aggregate-rate stepping is cheap.
    """
    sim = SimParams(lam)
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    if not cap > 0:
        raise ValueError(f"cap must be positive, got {cap}")
    degrees = [int(d) for d in degrees]
    if any(d <= 0 for d in degrees):
        raise ValueError(f"degrees must be positive, got {degrees}")
    if probe_time is not None and not 0 <= probe_time <= cap:
        raise ValueError(f"probe time {probe_time} outside [0, {cap}]")
    stop = StopRule(t_max=cap)
    sample = [probe_time] if probe_time is not None else None
    rows = []
    for d in degrees:
        g = make_star(d)
        seeds = _spawn_seeds(rng, trials)

        def run(chunk: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            taus = np.empty(len(chunk))
            hits = np.zeros(len(chunk), dtype=bool)
            probe = np.zeros(len(chunk))
            for j, i in enumerate(chunk):
                stream = RngStream(int(seeds[i]), 0)
                res = extinction_time_full(g, sim, stop, stream, sample_times=sample, engine=engine)
                hits[j] = res.survived
                taus[j] = cap if res.survived else res.extinction_time
                if sample is not None:
                    probe[j] = res.trajectory[0, 1]
            return taus, hits, probe

        parts = _parallel(run, _chunks(trials, threads), threads)
        taus = np.concatenate([p[0] for p in parts])
        hits = np.concatenate([p[1] for p in parts])
        probe = np.concatenate([p[2] for p in parts])
        rows.append(
            StarScanRow(
                degree=d,
                trials=trials,
                cap=cap,
                median_capped_time=float(np.median(taus)),
                cap_hit_fraction=float(hits.mean()),
                probe_time=probe_time,
                probe_alive_fraction=None if sample is None else float((probe > 0).mean()),
                probe_mean_count=None if sample is None else float(probe.mean()),
                probe_counts=None if sample is None else tuple(int(c) for c in probe),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Box-grid classification frequencies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TessRowStat:
    """Per-row aggregate over all samples of one survey."""

    row: int
    boxes_per_sample: int
    mean_mass: float
    good_lower_bound: float
    observed_good_fraction: float


@dataclass(frozen=True)
class TessellationSurvey:
    n: float
    epsilon: float
    alpha: float
    lam: float
    samples: int
    threshold: int
    rows: tuple[TessRowStat, ...]
    connected_fraction: float
    mean_backbone_vertex_fraction: float


def tessellation_survey(
    n: float,
    epsilon: float,
    alpha: float,
    lam: float,
    samples: int,
    rng: RngStream,
) -> TessellationSurvey:
    """Classify fresh samples against the box grid; report good-box rates."""
    if samples <= 0:
        raise ValueError(f"samples must be positive, got {samples}")
    grid = build_grid(n, epsilon, alpha)
    rect = wrap_window(n)
    seeds = _spawn_seeds(rng, samples)
    n_rows = grid.n_rows
    good_counts = np.zeros(n_rows)
    connected = 0
    backbone_frac = 0.0
    threshold = None
    for i in range(samples):
        stream = RngStream(int(seeds[i]), 0)
        pts = sample_window(rect, alpha, stream)
        res = classify_points(grid, pts[:, 0], pts[:, 1], lam)
        threshold = res.threshold
        for j in range(n_rows):
            good_counts[j] += res.good[j].sum()
        connected += res.connected
        if len(pts):
            backbone_frac += res.backbone_vertices / len(pts)
    rows = tuple(
        TessRowStat(
            row=j,
            boxes_per_sample=grid.row_count(j),
            mean_mass=box_mean_mass(j, alpha),
            good_lower_bound=good_prob_lower_bound(j, lam, alpha),
            observed_good_fraction=float(good_counts[j] / (grid.row_count(j) * samples)),
        )
        for j in range(n_rows)
    )
    return TessellationSurvey(
        n=float(n),
        epsilon=epsilon,
        alpha=alpha,
        lam=lam,
        samples=samples,
        threshold=int(threshold),
        rows=rows,
        connected_fraction=connected / samples,
        mean_backbone_vertex_fraction=backbone_frac / samples,
    )


# ---------------------------------------------------------------------------
# Config and output plumbing
# ---------------------------------------------------------------------------


def parse_config(text: str) -> dict[str, str]:
    """Parse flat ``section.key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'section.key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ValueError(f"config line {lineno}: empty key")
        if key in out:
            raise ValueError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def write_csv(path, rows: Sequence[Mapping], fieldnames: Sequence[str] | None = None) -> None:
    """One row per parameter point, columns named after the result fields."""
    if fieldnames is None:
        if not rows:
            raise ValueError("cannot infer CSV columns from zero rows")
        fieldnames = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def write_summary(path, payload: Mapping) -> None:
    """Deterministic JSON summary (sorted keys, trailing newline)."""
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
