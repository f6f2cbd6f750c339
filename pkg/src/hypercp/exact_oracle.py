"""Exact small-instance computations used to validate the simulators.

Three tools: full-state-space CTMC analysis (transient probabilities by
uniformization, expected absorption time by a linear solve), exhaustive
enumeration of the vertex-path families behind the low-infection-rate
upper bounds, and the closed-form height thresholds those bounds use.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from hypercp.errors import BudgetError, CapacityError
from hypercp.geometry import height_for_degree
from hypercp.graph import Graph

__all__ = [
    "STATE_CAP",
    "PathFamily",
    "WeightSummary",
    "ThresholdHeights",
    "exact_extinction_probability",
    "exact_expected_extinction_time",
    "enumerate_path_families",
    "path_weight_sum",
    "threshold_heights",
]

logger = logging.getLogger(__name__)

STATE_CAP = 12

# Largest uniformization step (rate * dt); larger horizons are split so the
# Poisson weights never underflow.
_MAX_STEP_MASS = 50.0


def _check_small(g: Graph, state_cap: int) -> None:
    if g.n_vertices > state_cap:
        raise CapacityError(
            f"state space needs {g.n_vertices} vertices <= cap {state_cap}"
        )


def _initial_mask(g: Graph, initial) -> int:
    mask = 0
    for v in initial:
        v = int(v)
        if not 0 <= v < g.n_vertices:
            raise ValueError(f"initial vertex {v} out of range")
        mask |= 1 << v
    return mask


def _generator(g: Graph, lam: float) -> sparse.csr_matrix:
    """Sparse CTMC generator over all 2^|V| infection states.

    State integers are vertex bitmasks; the empty state 0 is absorbing.
    Recovery moves have rate 1 per infected vertex, infection moves rate
    lam times the number of infected neighbors of the healthy target.
    """
    n = g.n_vertices
    nbr_mask = [0] * n
    for v in range(n):
        for u in g.neighbors(v):
            nbr_mask[v] |= 1 << int(u)
    size = 1 << n
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for s in range(1, size):
        out = 0.0
        for v in range(n):
            bit = 1 << v
            if s & bit:
                rows.append(s)
                cols.append(s ^ bit)
                vals.append(1.0)
                out += 1.0
            else:
                k = (s & nbr_mask[v]).bit_count()
                if k:
                    rate = lam * k
                    rows.append(s)
                    cols.append(s | bit)
                    vals.append(rate)
                    out += rate
        rows.append(s)
        cols.append(s)
        vals.append(-out)
    return sparse.csr_matrix(
        (np.array(vals), (np.array(rows), np.array(cols))), shape=(size, size)
    )


def exact_extinction_probability(
    g: Graph, initial, lam: float, t: float, state_cap: int = STATE_CAP, tol: float = 1e-10
) -> float:
    """P(no vertex infected at time t) starting from ``initial``, exactly.

    Uniformization with adaptive term count; the horizon is split into
    steps so each step's Poisson series converges fast, and the dropped
    tail over all steps stays below ``tol``.
    """
    _check_small(g, state_cap)
    if lam < 0.0:
        raise ValueError(f"infection rate must be >= 0, got {lam}")
    if t < 0.0:
        raise ValueError(f"time must be >= 0, got {t}")
    s0 = _initial_mask(g, initial)
    if s0 == 0:
        return 1.0
    if t == 0.0:
        return 0.0
    q = _generator(g, lam)
    rate = float(-q.diagonal().min())
    if rate == 0.0:
        return 0.0
    p_step = sparse.identity(q.shape[0], format="csr") + q / rate
    n_steps = max(1, math.ceil(rate * t / _MAX_STEP_MASS))
    step_mass = rate * t / n_steps
    tol_step = tol / n_steps
    v = np.zeros(q.shape[0])
    v[s0] = 1.0
    for _ in range(n_steps):
        pmf = math.exp(-step_mass)
        cum = pmf
        term = v
        acc = pmf * term
        k = 0
        while 1.0 - cum > tol_step:
            k += 1
            if k > 100_000:
                raise RuntimeError("uniformization series failed to converge")
            term = term @ p_step
            pmf *= step_mass / k
            cum += pmf
            acc = acc + pmf * term
        v = acc
    return float(v[0])


def exact_expected_extinction_time(
    g: Graph, initial, lam: float, state_cap: int = STATE_CAP
) -> float:
    """Expected time to reach the all-healthy state, by first-step analysis.

    Solves the linear system over the transient states (every nonempty
    infection set) with the empty state absorbing.
    """
    _check_small(g, state_cap)
    if lam < 0.0:
        raise ValueError(f"infection rate must be >= 0, got {lam}")
    s0 = _initial_mask(g, initial)
    if s0 == 0:
        raise ValueError("initial infected set must be nonempty")
    q = _generator(g, lam)
    a = (-q[1:, 1:]).tocsc()
    times = spsolve(a, np.ones(a.shape[0]))
    return float(times[s0 - 1])


# ---------------------------------------------------------------------------
# Vertex-path families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PathFamily:
    """Exhaustive truncated enumeration of the bounded-weight vertex paths.

    All paths start at ``root`` and step along graph edges.  ``into_avoid``
    maps jump count k to the paths whose first k vertices are distinct and
    outside ``avoid`` and whose last vertex lands in ``avoid``.  ``revisits``
    (k >= 3) collects paths whose first k vertices are distinct and outside
    ``avoid`` and whose last vertex repeats one of them.  ``bounces`` are
    the 3-jump paths (root, u, root, v) over neighbor pairs u, v of the
    root, u = v allowed.
    """

    root: int
    avoid: frozenset
    max_jumps: int
    max_degree: int
    into_avoid: dict = field(default_factory=dict)
    revisits: dict = field(default_factory=dict)
    bounces: list = field(default_factory=list)

    def counts(self) -> dict:
        return {
            "into_avoid": {k: len(v) for k, v in sorted(self.into_avoid.items())},
            "revisits": {k: len(v) for k, v in sorted(self.revisits.items())},
            "bounces": len(self.bounces),
        }


def enumerate_path_families(
    g: Graph, root: int, avoid, max_len: int, node_budget: int = 5_000_000
) -> PathFamily:
    """DFS enumeration of the path families up to ``max_len`` jumps.

    ``avoid`` must not contain the root.  Raises BudgetError when the DFS
    touches more than ``node_budget`` prefixes (dense graphs blow up
    exponentially in max_len).
    """
    root = int(root)
    if not 0 <= root < g.n_vertices:
        raise ValueError(f"root {root} out of range")
    avoid = frozenset(int(v) for v in avoid)
    for v in avoid:
        if not 0 <= v < g.n_vertices:
            raise ValueError(f"avoid vertex {v} out of range")
    if root in avoid:
        raise ValueError("root must not be in the avoid set")
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    maxdeg = int(g.degrees.max()) if g.n_vertices else 0
    fam = PathFamily(
        root=root, avoid=avoid, max_jumps=max_len, max_degree=maxdeg
    )
    visited_budget = [0]

    prefix = [root]
    on_prefix = {root}

    def visit() -> None:
        visited_budget[0] += 1
        if visited_budget[0] > node_budget:
            raise BudgetError(f"path enumeration exceeded {node_budget} prefixes")
        k = len(prefix)
        if k > max_len:
            return
        for w in g.neighbors(prefix[-1]):
            w = int(w)
            full = tuple(prefix) + (w,)
            if w in avoid:
                fam.into_avoid.setdefault(k, []).append(full)
            elif w in on_prefix:
                if k >= 3:
                    fam.revisits.setdefault(k, []).append(full)
            else:
                prefix.append(w)
                on_prefix.add(w)
                visit()
                on_prefix.discard(w)
                prefix.pop()

    visit()
    for u in g.neighbors(root):
        for v in g.neighbors(root):
            fam.bounces.append((root, int(u), root, int(v)))
    return fam


@dataclass(frozen=True)
class WeightSummary:
    """Per-family and total sums of (2 lam)^jumps over enumerated paths."""

    lam: float
    into_avoid: float
    revisits: float
    bounces: float
    truncation_tail: float

    @property
    def total(self) -> float:
        return self.into_avoid + self.revisits + self.bounces


def path_weight_sum(fam: PathFamily, lam: float) -> WeightSummary:
    """Sum (2 lam)^{jump count} over each family of ``fam``.

    Valid in the lam < 1/2 regime the bound lives in.  The enumeration is
    truncated at max_jumps; the geometric tail estimate
    (2 lam d)^{max_jumps+1}/(1 - 2 lam d), d the max degree, is logged and
    reported, infinite when 2 lam d >= 1.
    """
    if not 0.0 < lam < 0.5:
        raise ValueError(f"weight sums need 0 < lam < 1/2, got {lam}")
    x = 2.0 * lam
    w_avoid = sum(len(paths) * x**k for k, paths in fam.into_avoid.items())
    w_rev = sum(len(paths) * x**k for k, paths in fam.revisits.items())
    w_bounce = len(fam.bounces) * x**3
    growth = x * fam.max_degree
    if growth < 1.0:
        tail = growth ** (fam.max_jumps + 1) / (1.0 - growth)
    else:
        tail = math.inf
    logger.info(
        "path weight truncation at %d jumps, geometric tail estimate %.3g",
        fam.max_jumps,
        tail,
    )
    return WeightSummary(
        lam=lam,
        into_avoid=w_avoid,
        revisits=w_rev,
        bounces=w_bounce,
        truncation_tail=tail,
    )


# ---------------------------------------------------------------------------
# Height thresholds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdHeights:
    """The height scales the small-lam analysis splits the half-plane at.

    Each height is where the expected degree crosses a stated scale:
    ``star_height`` at 1/lam^2 (a star that large sustains infection for
    a long stretch), ``near_star_height`` at lam^{sigma-2} (just under the
    star scale), ``log_star_height`` at (delta/lam^2) log(1/lam).
    ``seed_height`` = log(big_c/lam)/(1-alpha) is where the ladder-search
    construction starts, and ``ladder_base_height`` = 2 log(2 d) with
    d = big_c log(1/lam)/lam^2 the degree the ladder must supply.
    ``ordering_holds`` records whether near_star < star < log_star at
    these parameters (true once lam is small enough that
    delta log(1/lam) > 1; reported, never enforced).
    """

    lam: float
    alpha: float
    sigma: float
    delta: float
    big_c: float
    star_height: float
    near_star_height: float
    log_star_height: float
    seed_height: float
    ladder_degree: float
    ladder_base_height: float
    ordering_holds: bool


def threshold_heights(
    lam: float,
    alpha: float,
    sigma: float = 0.1,
    delta: float = 0.05,
    big_c: float = 10.0,
) -> ThresholdHeights:
    """Evaluate all five threshold heights at the given parameters.

    sigma, delta, big_c have no canonical values; the defaults are honest
    knobs and every report echoes them.
    """
    if not 0.0 < lam < 0.5:
        raise ValueError(f"thresholds need 0 < lam < 1/2, got {lam}")
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")
    if not 0.0 < sigma < 1.0:
        raise ValueError(f"sigma must lie in (0, 1), got {sigma}")
    if delta <= 0.0:
        raise ValueError(f"delta must be > 0, got {delta}")
    if big_c <= 0.0:
        raise ValueError(f"big_c must be > 0, got {big_c}")
    log_inv = math.log(1.0 / lam)
    star = height_for_degree(lam**-2, alpha)
    near = height_for_degree(lam ** (sigma - 2.0), alpha)
    log_star = height_for_degree((delta / lam**2) * log_inv, alpha)
    seed = math.log(big_c / lam) / (1.0 - alpha)
    d = big_c * log_inv / lam**2
    return ThresholdHeights(
        lam=lam,
        alpha=alpha,
        sigma=sigma,
        delta=delta,
        big_c=big_c,
        star_height=star,
        near_star_height=near,
        log_star_height=log_star,
        seed_height=seed,
        ladder_degree=d,
        ladder_base_height=2.0 * math.log(2.0 * d),
        ordering_holds=near < star < log_star,
    )
