"""The contact process: fast event-driven engine plus graphical construction.

Two engines, both distributionally exact:

* the fast engine (``simulate``) never materializes future randomness; it
  runs an aggregate-rate race over the infected set (or, for dense initial
  sets, a constant-rate thinning loop) and supports the survival stop rules;
* the record engine samples the full graphical construction (recovery marks
  at rate 1 per vertex, transmission arrows at rate lam per directed edge)
  on a finite horizon, which makes coupling, duality, and ordered-trace
  queries possible on small graphs.

Recovery rate is fixed at 1 throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from hypercp import _kernels
from hypercp.errors import BudgetError
from hypercp.graph import Graph
from hypercp.sampler import RngStream

__all__ = [
    "SimParams",
    "StopRule",
    "RunResult",
    "GraphicalRecord",
    "simulate",
    "extinction_time_full",
    "batch_extinction",
    "build_graphical",
    "evolve_from_record",
    "has_trace",
    "count_traces",
    "simple_paths",
]

_VERDICTS = {0: "extinct", 1: "horizon", 2: "escape", 3: "mass-cap"}

# Above this size and initial-density the thinning engine wins; below it the
# aggregate-rate engine does.  Either is exact; this only affects speed.
_STATIC_MIN_VERTICES = 256


@dataclass(frozen=True)
class SimParams:
    """Infection rate lam >= 0 per directed edge; recovery rate fixed at 1.

    Rate 0 means pure recovery: infected vertices heal independently and
    nothing spreads, which is a useful calibration baseline.
    """

    lam: float

    def __post_init__(self) -> None:
        if not self.lam >= 0.0:
            raise ValueError(f"infection rate must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class StopRule:
    """Horizon plus optional survival proxies.

    ``escape_radius``: declare survival when a vertex at hop distance >= r
    from the reference vertex is ever infected.  ``mass_cap``: declare
    survival when that many distinct vertices have ever been infected.
    """

    t_max: float
    escape_radius: int | None = None
    mass_cap: int | None = None

    def __post_init__(self) -> None:
        if not self.t_max > 0.0:
            raise ValueError(f"t_max must be > 0, got {self.t_max}")
        if self.escape_radius is not None and self.escape_radius < 1:
            raise ValueError(f"escape_radius must be >= 1, got {self.escape_radius}")
        if self.mass_cap is not None and self.mass_cap < 1:
            raise ValueError(f"mass_cap must be >= 1, got {self.mass_cap}")


@dataclass(frozen=True)
class RunResult:
    """Outcome of one trial.

    ``verdict`` is ``"extinct"`` or a survival reason (``"horizon"``,
    ``"escape"``, ``"mass-cap"``); ``extinction_time`` is present iff
    extinct.  ``trajectory`` (if sampled) has rows (time, |infected|), with
    count -1 at times the truncated run never reached.
    """

    verdict: str
    extinction_time: float | None
    ever_infected_count: int
    max_graph_distance_reached: int
    trajectory: np.ndarray | None = None

    @property
    def survived(self) -> bool:
        return self.verdict != "extinct"


def _initial_array(g: Graph, initial) -> np.ndarray:
    init = np.unique(np.asarray(list(initial), dtype=np.int64))
    if len(init) == 0:
        raise ValueError("initial infected set must be nonempty")
    if init[0] < 0 or init[-1] >= g.n_vertices:
        raise ValueError("initial vertex id out of range")
    return init


def simulate(
    g: Graph,
    initial,
    p: SimParams,
    stop: StopRule,
    rng: RngStream,
    sample_times=None,
    engine: str = "auto",
    reference: int | None = None,
) -> RunResult:
    """One contact-process trial from ``initial``; exact CTMC sampling.

    ``engine`` picks the event loop: "dynamic" (aggregate rate over the
    infected set), "static" (thinning against the constant all-vertex rate),
    or "auto".  ``reference`` is the vertex hop distances are measured from
    (defaults to the graph root, else the smallest initial id).
    """
    init = _initial_array(g, initial)
    if reference is None:
        reference = g.root_id if g.root_id is not None else int(init[0])
    dist = _kernels.bfs_distances(g.indptr, g.indices, reference)
    times = (
        np.empty(0, dtype=np.float64)
        if sample_times is None
        else np.asarray(sample_times, dtype=np.float64)
    )
    if len(times) and (np.any(np.diff(times) < 0) or times[-1] > stop.t_max or times[0] < 0):
        raise ValueError("sample_times must be sorted within [0, t_max]")
    escape = 0 if stop.escape_radius is None else int(stop.escape_radius)
    mass = 0 if stop.mass_cap is None else int(stop.mass_cap)
    if engine == "auto":
        engine = (
            "static"
            if g.n_vertices >= _STATIC_MIN_VERTICES and 4 * len(init) >= g.n_vertices
            else "dynamic"
        )
    seed = np.uint64(rng.uint64())
    if engine == "dynamic":
        verdict, t, ever, max_dist, traj = _kernels.run_dynamic(
            g.indptr, g.indices, init, p.lam, stop.t_max, dist, escape, mass, times, seed
        )
    elif engine == "static":
        esrc, edst = g.directed_edges()
        verdict, t, ever, max_dist, traj = _kernels.run_static(
            g.indptr, g.indices, esrc, edst, init, p.lam, stop.t_max, dist, escape, mass, times, seed
        )
    else:
        raise ValueError(f"unknown engine {engine!r}")
    trajectory = None
    if sample_times is not None:
        trajectory = np.column_stack((times, traj.astype(np.float64)))
    return RunResult(
        verdict=_VERDICTS[verdict],
        extinction_time=t if verdict == 0 else None,
        ever_infected_count=int(ever),
        max_graph_distance_reached=int(max_dist),
        trajectory=trajectory,
    )


def extinction_time_full(g: Graph, p: SimParams, stop: StopRule, rng: RngStream, **kwargs) -> RunResult:
    """Trial started from every vertex infected (the extinction-time scan)."""
    if g.n_vertices == 0:
        raise ValueError("graph is empty")
    return simulate(g, np.arange(g.n_vertices), p, stop, rng, **kwargs)


# ---------------------------------------------------------------------------
# Graphical construction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GraphicalRecord:
    """All recovery marks and transmission arrows on [0, horizon].

    Events are stored merged and time-sorted: kind 0 is a recovery mark at
    vertex ``a``; kind 1 is a transmission arrow ``a -> b``.  Simultaneous
    times cannot occur in law; on floating collision the stable sort order
    (marks before arrows at exactly equal times) is the documented
    tie-break.
    """

    horizon: float
    n_vertices: int
    ev_time: np.ndarray
    ev_kind: np.ndarray
    ev_a: np.ndarray
    ev_b: np.ndarray
    mark_offsets: np.ndarray
    arrow_offsets: np.ndarray
    arrow_src: np.ndarray
    arrow_dst: np.ndarray

    def marks(self, v: int) -> np.ndarray:
        """Sorted recovery-mark times at vertex v."""
        sel = (self.ev_kind == 0) & (self.ev_a == v)
        return self.ev_time[sel]

    def arrows(self, src: int, dst: int) -> np.ndarray:
        """Sorted arrow times on the directed edge src -> dst."""
        sel = (self.ev_kind == 1) & (self.ev_a == src) & (self.ev_b == dst)
        return self.ev_time[sel]

    @property
    def n_marks(self) -> int:
        return int(len(self.mark_offsets) and self.mark_offsets[-1])

    @property
    def n_arrows(self) -> int:
        return int(len(self.arrow_offsets) and self.arrow_offsets[-1])


DEFAULT_EVENT_BUDGET = 10_000_000


def build_graphical(
    g: Graph, p: SimParams, horizon: float, rng: RngStream, event_budget: int = DEFAULT_EVENT_BUDGET
) -> GraphicalRecord:
    """Sample the full graphical construction on [0, horizon].

    Memory scales with |V| T (1 + lam * maxdeg); raises BudgetError above
    ``event_budget``.  Meant for small graphs (traces, duality, coupling).
    """
    if horizon < 0.0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    n = g.n_vertices
    maxdeg = int(g.degrees.max()) if n else 0
    est = n * horizon * (1.0 + p.lam * maxdeg)
    if est > event_budget:
        raise BudgetError(f"estimated event load {est:.3g} exceeds budget {event_budget}")
    esrc, edst = g.directed_edges()
    mark_counts = rng.gen.poisson(horizon, size=n)
    arrow_counts = rng.gen.poisson(p.lam * horizon, size=len(esrc))
    n_marks = int(mark_counts.sum())
    n_arrows = int(arrow_counts.sum())
    mark_times = rng.gen.uniform(0.0, horizon, size=n_marks)
    arrow_times = rng.gen.uniform(0.0, horizon, size=n_arrows)

    ev_time = np.concatenate((mark_times, arrow_times))
    ev_kind = np.concatenate(
        (np.zeros(n_marks, dtype=np.int8), np.ones(n_arrows, dtype=np.int8))
    )
    ev_a = np.concatenate(
        (np.repeat(np.arange(n, dtype=np.int64), mark_counts), np.repeat(esrc, arrow_counts))
    )
    ev_b = np.concatenate(
        (np.full(n_marks, -1, dtype=np.int64), np.repeat(edst, arrow_counts))
    )
    order = np.argsort(ev_time, kind="stable")
    mark_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(mark_counts, out=mark_offsets[1:])
    arrow_offsets = np.zeros(len(esrc) + 1, dtype=np.int64)
    np.cumsum(arrow_counts, out=arrow_offsets[1:])
    return GraphicalRecord(
        horizon=horizon,
        n_vertices=n,
        ev_time=ev_time[order],
        ev_kind=ev_kind[order],
        ev_a=ev_a[order],
        ev_b=ev_b[order],
        mark_offsets=mark_offsets,
        arrow_offsets=arrow_offsets,
        arrow_src=esrc,
        arrow_dst=edst,
    )


class _RecordEvolution:
    """State map t -> infected set for one record and one initial set."""

    def __init__(self, rec: GraphicalRecord, initial):
        self._rec = rec
        self._initial = frozenset(int(v) for v in initial)
        for v in self._initial:
            if not 0 <= v < rec.n_vertices:
                raise ValueError(f"initial vertex {v} out of range")

    def __call__(self, t: float) -> frozenset:
        rec = self._rec
        if t < 0.0 or t > rec.horizon:
            raise ValueError(f"query time {t} outside [0, {rec.horizon}]")
        state = np.zeros(rec.n_vertices, dtype=bool)
        for v in self._initial:
            state[v] = True
        stop = np.searchsorted(rec.ev_time, t, side="right")
        for e in range(stop):
            a = rec.ev_a[e]
            if rec.ev_kind[e] == 0:
                state[a] = False
            elif state[a]:
                state[rec.ev_b[e]] = True
        return frozenset(np.flatnonzero(state).tolist())


def evolve_from_record(rec: GraphicalRecord, initial) -> _RecordEvolution:
    """Chronological-sweep evaluator; reuse one record for many initial sets.

    The returned callable maps t (in [0, horizon]) to the infected set; the
    state is right-continuous, so events at exactly t are applied.
    """
    return _RecordEvolution(rec, initial)


def has_trace(rec: GraphicalRecord, gamma) -> bool:
    """Whether some infection path starting at (gamma[0], 0) has ordered
    trace exactly ``gamma`` within the record's horizon.

    Dynamic programming over the time-sorted events: alive[i] says the
    prefix gamma[0..i] is realizable with the occupancy of gamma[i] still
    unbroken; marks clear it, arrows extend it, success latches when the
    full path is reached.
    """
    path = np.asarray(list(gamma), dtype=np.int64)
    if len(path) == 0:
        raise ValueError("trace must contain at least the starting vertex")
    if path.min() < 0 or path.max() >= rec.n_vertices:
        raise ValueError("trace vertex out of range")
    offsets = np.array([0, len(rec.ev_time)], dtype=np.int64)
    out = _kernels.trace_dp(rec.ev_kind, rec.ev_a, rec.ev_b, offsets, path)
    return bool(out[0])


def count_traces(records: Sequence[GraphicalRecord], gamma) -> int:
    """Number of records containing an infection path with trace exactly ``gamma``.

    One kernel pass over the concatenated event streams; equivalent to
    summing has_trace over the records.
    """
    records = list(records)
    if not records:
        return 0
    path = np.asarray(list(gamma), dtype=np.int64)
    if len(path) == 0:
        raise ValueError("trace must contain at least the starting vertex")
    for rec in records:
        if path.min() < 0 or path.max() >= rec.n_vertices:
            raise ValueError("trace vertex out of range")
    sizes = [len(rec.ev_time) for rec in records]
    offsets = np.zeros(len(records) + 1, dtype=np.int64)
    np.cumsum(sizes, out=offsets[1:])
    ev_kind = np.concatenate([rec.ev_kind for rec in records])
    ev_a = np.concatenate([rec.ev_a for rec in records])
    ev_b = np.concatenate([rec.ev_b for rec in records])
    out = _kernels.trace_dp(ev_kind, ev_a, ev_b, offsets, path)
    return int(out.sum())


def simple_paths(g: Graph, max_vertices: int) -> list[tuple[int, ...]]:
    """All simple vertex paths in ``g`` with 1 to ``max_vertices`` vertices.

    Single vertices count as paths of one vertex; each direction of a longer
    path is listed separately, matching the directed reading of a trace.
    """
    if max_vertices < 1:
        raise ValueError(f"max_vertices must be >= 1, got {max_vertices}")
    paths: list[tuple[int, ...]] = []

    def extend(path: list[int], used: set[int]) -> None:
        paths.append(tuple(path))
        if len(path) == max_vertices:
            return
        for w in g.neighbors(path[-1]):
            w = int(w)
            if w not in used:
                path.append(w)
                used.add(w)
                extend(path, used)
                path.pop()
                used.remove(w)

    for v in range(g.n_vertices):
        extend([v], {v})
    return sorted(paths, key=lambda p: (len(p), p))


def batch_extinction(
    g: Graph, initial, p: SimParams, t_max: float, trials: int, rng: RngStream
) -> tuple[int, float]:
    """Many aggregate-rate trials at once: (extinct count, summed extinction times).

    Keeps the per-trial Python overhead out of large Monte Carlo loops on
    small graphs; survivors at t_max count toward neither output.
    """
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    if not t_max > 0:
        raise ValueError(f"t_max must be positive, got {t_max}")
    init = _initial_array(g, initial)
    seed = np.uint64(rng.uint64())
    extinct, time_sum = _kernels.run_dynamic_batch(
        g.indptr, g.indices, init, p.lam, t_max, trials, seed
    )
    return int(extinct), float(time_sum)
