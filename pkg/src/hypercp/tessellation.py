"""Box tessellation of the half-plane and the ladder-embedding search.

Two geometric structures drive the survival arguments:

* a dyadic grid of boxes whose rows double in width as height grows by a
  fixed increment; every box induces a clique, parents and children are
  fully cross-connected, and boxes holding enough vertices ("good") form
  a backbone graph that carries the infection;
* a half-line ladder of boxes marching right and upward whose consecutive
  upper boxes are deterministically fully adjacent, used to embed a chain
  of large stars starting from one tall vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from hypercp.graph import Graph, graph_from_edges
from hypercp.sampler import Window

__all__ = [
    "Box",
    "BoxGrid",
    "build_grid",
    "classify_points",
    "box_mean_mass",
    "good_prob_lower_bound",
    "TessellationResult",
    "classify_and_backbone",
    "BoxAdjacencyCheck",
    "check_box_adjacency",
    "LadderBoxes",
    "ladder_boxes",
    "LadderEmbedding",
    "find_ladder_embedding",
]

_EPS_MAX = 1.0 / math.log(2.0)


def _level_height(alpha: float) -> float:
    return ((alpha + 1.0) / (2.0 * alpha)) * math.log(2.0)


def _check_alpha(alpha: float) -> None:
    if not 0.5 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (1/2, 1), got {alpha}")


@dataclass(frozen=True)
class Box:
    """One grid cell: half-open in both axes, geometry derived from (row, index)."""

    row: int
    index: int
    x_min: float
    x_max: float
    h_min: float
    h_max: float
    good: bool | None = None


@dataclass(frozen=True)
class BoxGrid:
    """Dyadic box grid over [0, footprint) x [0, (top_row+1) L).

    Row j has boxes of width 2^{j-1} (so row 0 has width 1/2) and height
    L = ((alpha+1)/(2 alpha)) log 2, sitting on [jL, (j+1)L).  Counts halve
    upward: row j holds base_count * 2^{top_row - j} boxes, so every row
    spans the same footprint.  The parent of box (j, k) is (j+1, k // 2).
    """

    n: float
    epsilon: float
    alpha: float

    def __post_init__(self) -> None:
        _check_alpha(self.alpha)
        if not 0.0 < self.epsilon < _EPS_MAX:
            raise ValueError(
                f"epsilon must lie in (0, 1/log 2) = (0, {_EPS_MAX:.4f}), got {self.epsilon}"
            )
        if self.n <= 1.0:
            raise ValueError(f"scale n must be > 1, got {self.n}")
        if self.base_count < 1:
            raise ValueError(f"n={self.n} too small: zero top-row boxes")

    @property
    def level_height(self) -> float:
        return _level_height(self.alpha)

    @property
    def top_row(self) -> int:
        return math.floor(self.epsilon * math.log(self.n))

    @property
    def n_rows(self) -> int:
        return self.top_row + 1

    @property
    def base_count(self) -> int:
        return math.floor(self.n ** (1.0 - self.epsilon * math.log(2.0)))

    def row_count(self, j: int) -> int:
        if not 0 <= j <= self.top_row:
            raise ValueError(f"row {j} outside 0..{self.top_row}")
        return self.base_count * 2 ** (self.top_row - j)

    def box_width(self, j: int) -> float:
        return 2.0 ** (j - 1)

    @property
    def footprint(self) -> float:
        """Common x-span of every row."""
        return self.base_count * 2.0 ** (self.top_row - 1)

    def box(self, j: int, k: int) -> Box:
        if not 0 <= k < self.row_count(j):
            raise ValueError(f"index {k} outside row {j}")
        w = self.box_width(j)
        lh = self.level_height
        return Box(
            row=j, index=k, x_min=w * k, x_max=w * (k + 1), h_min=j * lh, h_max=(j + 1) * lh
        )

    def parent(self, j: int, k: int) -> tuple[int, int]:
        if j >= self.top_row:
            raise ValueError(f"row {j} has no parent row")
        return j + 1, k // 2

    def children(self, j: int, k: int) -> tuple[tuple[int, int], tuple[int, int]]:
        if j <= 0:
            raise ValueError("row 0 has no children")
        return (j - 1, 2 * k), (j - 1, 2 * k + 1)

    def locate(self, xs, hs) -> tuple[np.ndarray, np.ndarray]:
        """Map points to (row, index), -1 where outside the grid."""
        xs = np.asarray(xs, dtype=np.float64)
        hs = np.asarray(hs, dtype=np.float64)
        rows = np.floor(hs / self.level_height).astype(np.int64)
        ok = (hs >= 0.0) & (rows >= 0) & (rows <= self.top_row)
        safe_rows = np.where(ok, rows, 0)
        widths = np.power(2.0, safe_rows - 1)
        idx = np.floor(xs / widths).astype(np.int64)
        counts = self.base_count * (1 << (self.top_row - safe_rows))
        ok &= (xs >= 0.0) & (idx >= 0) & (idx < counts)
        rows = np.where(ok, rows, -1)
        idx = np.where(ok, idx, -1)
        return rows, idx


def build_grid(n: float, epsilon: float, alpha: float) -> BoxGrid:
    """Construct the dyadic grid; see BoxGrid for the geometry."""
    return BoxGrid(n=float(n), epsilon=float(epsilon), alpha=float(alpha))


def box_mean_mass(j: int, alpha: float) -> float:
    """Expected vertex count of one row-j box under the half-plane intensity.

    Closed form (2^{j-1}/pi)(e^{-alpha j L} - e^{-alpha (j+1) L}); grows
    without bound in j because L < log2 / alpha.
    """
    if j < 0:
        raise ValueError(f"row must be >= 0, got {j}")
    _check_alpha(alpha)
    lh = _level_height(alpha)
    return (2.0 ** (j - 1) / math.pi) * (
        math.exp(-alpha * j * lh) - math.exp(-alpha * (j + 1) * lh)
    )


def good_prob_lower_bound(j: int, lam: float, alpha: float) -> float:
    """Closed-form lower bound on the chance a row-j box is good.

    Good means holding at least lam^{-3} vertices.  The expression
    max(0, 1 - (e lam^3 mu_j)^{lam^{-3}} e^{-mu_j}) is a genuine Poisson
    tail bound only once mu_j >= lam^{-3}; below that it is vacuous and
    callers should treat it as reporting-only.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lam must lie in (0, 1), got {lam}")
    mu = box_mean_mass(j, alpha)
    k = lam**-3
    # (e lam^3 mu)^k can overflow either way; work in logs.
    base = math.e * lam**3 * mu
    if base <= 0.0:
        return 0.0
    log_term = k * math.log(base) - mu
    if log_term >= 0.0:
        return 0.0
    return max(0.0, 1.0 - math.exp(log_term))


def _good_threshold(lam: float) -> int:
    return math.ceil(lam**-3 - 1e-9)


@dataclass(frozen=True)
class TessellationResult:
    """Classification of one sampled graph against a box grid.

    ``occupancy``/``good``/``retained`` hold one array per row.  The
    backbone keeps the good boxes whose component (under parent-child
    edges plus same-row adjacency on the top row) contains a top-row box;
    ``connected`` is the all-top-row-boxes-good flag, which for nonempty
    backbones coincides with actual backbone connectivity.  ``star_graph``
    (optional) is the hub-per-box subgraph: box members attach to their
    hub only, hubs of backbone-adjacent boxes are joined.
    """

    grid: BoxGrid
    threshold: int
    occupancy: tuple
    good: tuple
    retained: tuple
    connected: bool
    backbone_boxes: int
    backbone_vertices: int
    backbone_edges: tuple
    vertex_row: np.ndarray
    vertex_idx: np.ndarray
    hubs: dict | None = None
    star_graph: Graph | None = field(default=None, repr=False)

    @property
    def good_fraction_by_row(self) -> np.ndarray:
        return np.array([g.mean() if len(g) else 0.0 for g in self.good])


def classify_points(grid: BoxGrid, xs, hs, lam: float) -> TessellationResult:
    """Classify sampled points against the grid without any adjacency work.

    Sufficient for occupancy, good flags, backbone pruning, and the
    connectivity flag (all functions of counts alone); the returned result
    has no hub graph.  Use classify_and_backbone on a built graph when the
    hub subgraph is wanted.
    """
    thr = _good_threshold(lam)
    vrow, vidx = grid.locate(xs, hs)
    occupancy = []
    for j in range(grid.n_rows):
        sel = vrow == j
        occupancy.append(np.bincount(vidx[sel], minlength=grid.row_count(j)))
    good = tuple(occ >= thr for occ in occupancy)

    # Flat ids for good boxes, then union components of the box graph.
    flat: dict[tuple[int, int], int] = {}
    for j in range(grid.n_rows):
        for k in np.flatnonzero(good[j]):
            flat[(j, int(k))] = len(flat)
    parent_uf = list(range(len(flat)))

    def find(a: int) -> int:
        while parent_uf[a] != a:
            parent_uf[a] = parent_uf[parent_uf[a]]
            a = parent_uf[a]
        return a

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent_uf[rb] = ra

    edges = []
    top = grid.top_row
    for (j, k), fid in flat.items():
        if j < top:
            up = (j + 1, k // 2)
            if up in flat:
                edges.append(((j, k), up))
                union(fid, flat[up])
        if j == top:
            right = (j, k + 1)
            if right in flat:
                edges.append(((j, k), right))
                union(fid, flat[right])
    top_roots = {find(fid) for (j, _k), fid in flat.items() if j == top}
    retained_flags = tuple(np.zeros(grid.row_count(j), dtype=bool) for j in range(grid.n_rows))
    for (j, k), fid in flat.items():
        if find(fid) in top_roots:
            retained_flags[j][k] = True
    kept_edges = tuple(
        e for e in edges if retained_flags[e[0][0]][e[0][1]] and retained_flags[e[1][0]][e[1][1]]
    )
    connected = all(bool(x) for x in good[top]) if len(good[top]) else False
    backbone_boxes = int(sum(int(r.sum()) for r in retained_flags))
    backbone_vertices = int(
        sum(int(occupancy[j][retained_flags[j]].sum()) for j in range(grid.n_rows))
    )
    return TessellationResult(
        grid=grid,
        threshold=thr,
        occupancy=tuple(occupancy),
        good=good,
        retained=retained_flags,
        connected=connected,
        backbone_boxes=backbone_boxes,
        backbone_vertices=backbone_vertices,
        backbone_edges=kept_edges,
        vertex_row=vrow,
        vertex_idx=vidx,
    )


def classify_and_backbone(
    grid: BoxGrid, g: Graph, lam: float, build_star_graph: bool = True
) -> TessellationResult:
    """Flag good boxes, prune to the backbone, optionally build the hub graph."""
    if g.mode != "wrap":
        raise ValueError("tessellation expects a wrapped graph")
    if g.params is None or g.params.n != grid.n:
        raise ValueError("graph scale does not match grid scale")
    pts = g.points
    res = classify_points(grid, pts[:, 0], pts[:, 1], lam)
    if not build_star_graph:
        return res
    vrow, vidx = res.vertex_row, res.vertex_idx
    hubs: dict[tuple[int, int], int] = {}
    members: dict[tuple[int, int], list[int]] = {}
    for v in np.flatnonzero(vrow >= 0):
        j, k = int(vrow[v]), int(vidx[v])
        if res.retained[j][k]:
            members.setdefault((j, k), []).append(int(v))
    star_edges = []
    for box_key, vs in members.items():
        hub = min(vs)
        hubs[box_key] = hub
        for v in vs:
            if v != hub:
                star_edges.append((hub, v))
    for a, b in res.backbone_edges:
        star_edges.append((hubs[a], hubs[b]))
    star = graph_from_edges(g.n_vertices, star_edges, points=g.points)
    return replace(res, hubs=hubs, star_graph=star)


@dataclass(frozen=True)
class BoxAdjacencyCheck:
    """Exhaustive adjacency audit of a sampled graph against the grid."""

    clique_pairs: int
    clique_violations: int
    cross_pairs: int
    cross_violations: int

    @property
    def ok(self) -> bool:
        return self.clique_violations == 0 and self.cross_violations == 0


def check_box_adjacency(grid: BoxGrid, g: Graph) -> BoxAdjacencyCheck:
    """Verify every within-box pair and every parent-child cross pair is an edge.

    Both facts are deterministic consequences of the box geometry (widths
    at most 2^j against height floor jL with L > log 2), so any violation
    is an adjacency-builder bug, not bad luck.
    """
    if g.mode != "wrap":
        raise ValueError("tessellation expects a wrapped graph")
    pts = g.points
    vrow, vidx = grid.locate(pts[:, 0], pts[:, 1])
    members: dict[tuple[int, int], list[int]] = {}
    for v in np.flatnonzero(vrow >= 0):
        members.setdefault((int(vrow[v]), int(vidx[v])), []).append(int(v))
    cp = cv = xp = xv = 0
    for (j, k), vs in members.items():
        for a_i in range(len(vs)):
            for b_i in range(a_i + 1, len(vs)):
                cp += 1
                if not g.has_edge(vs[a_i], vs[b_i]):
                    cv += 1
        if j < grid.top_row:
            up = members.get((j + 1, k // 2))
            if up:
                for a in vs:
                    for b in up:
                        xp += 1
                        if not g.has_edge(a, b):
                            xv += 1
    return BoxAdjacencyCheck(
        clique_pairs=cp, clique_violations=cv, cross_pairs=xp, cross_violations=xv
    )


# ---------------------------------------------------------------------------
# Ladder boxes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LadderBoxes:
    """Half-line ladder geometry for embedding a chain of degree-d stars.

    Upper box k spans [offset(k), offset(k+1)) horizontally and all
    heights above base_height + k; its leaf box shares the x-interval at
    heights [0, 1).  Widths grow by a factor e per step, and consecutive
    upper boxes are close enough that every cross pair is adjacent:
    width(k) + width(k+1) <= e^{base_height + k}.
    """

    degree: int

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")

    @property
    def base_height(self) -> float:
        return 2.0 * math.log(2.0 * self.degree)

    def level_height(self, k: int) -> float:
        return self.base_height + k

    def width(self, k: int) -> float:
        return math.exp(self.base_height + k - 2.0)

    def offset(self, k: int) -> float:
        return self.width(0) * (math.exp(k) - 1.0) / (math.e - 1.0)

    def upper_box(self, k: int, x_origin: float = 0.0) -> Window:
        return Window(
            x_min=x_origin + self.offset(k),
            x_max=x_origin + self.offset(k + 1),
            h_min=self.level_height(k),
            h_max=math.inf,
        )

    def leaf_box(self, k: int, x_origin: float = 0.0) -> Window:
        return Window(
            x_min=x_origin + self.offset(k),
            x_max=x_origin + self.offset(k + 1),
            h_min=0.0,
            h_max=1.0,
        )

    def upper_mass(self, k: int, alpha: float) -> float:
        """Exact point-process mass of upper_box(k): (width(k)/pi) e^{-alpha level}."""
        _check_alpha(alpha)
        return (self.width(k) / math.pi) * math.exp(-alpha * self.level_height(k))

    def nonempty_probability_estimate(self, k: int, alpha: float) -> float:
        """Closed-form estimate of P(upper_box(k+1) occupied).

        Evaluates 1 - exp(-(1/alpha) e^{(1-alpha)(base_height + k) - 1}).
        The exact probability is 1 - exp(-upper_mass(k+1, alpha)); this
        estimate replaces the mass with a quantity larger by the constant
        factor (pi/alpha) e^{alpha}, so it overstates occupancy.  Kept as
        the documented comparison target; use upper_mass for the truth.
        """
        _check_alpha(alpha)
        mass = (1.0 / alpha) * math.exp((1.0 - alpha) * (self.base_height + k) - 1.0)
        return 1.0 - math.exp(-mass)


def ladder_boxes(d: int) -> LadderBoxes:
    """Ladder geometry for target star degree d."""
    return LadderBoxes(degree=int(d))


@dataclass(frozen=True)
class LadderEmbedding:
    """Outcome of the greedy ladder search from one tall root.

    ``spine`` lists the vertices found (the root first); ``leaf_counts``
    the number of neighbors each spine vertex has inside its leaf box.
    ``failed_row`` is the first k whose upper box was empty or whose spine
    vertex had fewer than ``degree`` leaves, None on success.
    """

    ladder: LadderBoxes
    root: int
    max_rows: int
    spine: tuple
    leaf_counts: tuple
    success: bool
    failed_row: int | None


def find_ladder_embedding(g: Graph, v: int, d: int, max_k: int) -> LadderEmbedding:
    """Greedy star-chain search: walk upper boxes rightward from vertex v.

    Works in raw x coordinates, so for wrapped graphs the ladder footprint
    must not cross the seam.  Each upper box may supply any vertex (the
    lowest id is taken); deterministic box adjacency makes every choice
    valid.  Requires v taller than the ladder base height.
    """
    ladder = ladder_boxes(d)
    v = int(v)
    if not 0 <= v < g.n_vertices:
        raise ValueError(f"vertex {v} out of range")
    if max_k < 0:
        raise ValueError(f"max_k must be >= 0, got {max_k}")
    pts = g.points
    x_v, h_v = float(pts[v, 0]), float(pts[v, 1])
    if h_v <= ladder.base_height:
        raise ValueError(
            f"root height {h_v:.3f} not above ladder base {ladder.base_height:.3f}"
        )
    spine: list[int] = []
    leaf_counts: list[int] = []
    failed: int | None = None
    for k in range(max_k + 1):
        if k == 0:
            vk = v
        else:
            box = ladder.upper_box(k, x_origin=x_v)
            inside = np.flatnonzero(box.contains(pts[:, 0], pts[:, 1]))
            if len(inside) == 0:
                failed = k
                break
            vk = int(inside[0])
        spine.append(vk)
        leaves = ladder.leaf_box(k, x_origin=x_v)
        nbrs = g.neighbors(vk)
        count = int(np.count_nonzero(leaves.contains(pts[nbrs, 0], pts[nbrs, 1])))
        leaf_counts.append(count)
        if count < d and failed is None:
            failed = k
            break
    return LadderEmbedding(
        ladder=ladder,
        root=v,
        max_rows=max_k,
        spine=tuple(spine),
        leaf_counts=tuple(leaf_counts),
        success=failed is None,
        failed_row=failed,
    )
