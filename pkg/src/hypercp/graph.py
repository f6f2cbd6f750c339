"""Graph construction and queries for the half-plane model.

Graphs hold their vertex coordinates plus a CSR adjacency computed under the
boundary-inclusive rule dist_x(u,v) <= e^{(h_u+h_v)/2}.  Three modes exist:

* ``"inf"``  - restriction of the infinite half-plane graph to a window;
  horizontal distance is plain |dx|.
* ``"wrap"`` - the finite model on the cylinder of circumference pi*n;
  horizontal distance is circular.
* ``"explicit"`` - combinatorial graphs (stars, spine-of-stars, oracle test
  graphs) where the edge set is given, not geometric.

Construction uses a height-band index (unit bands, per-band x-sorted arrays,
conservative range query, exact filter); ``build_adjacency_naive`` is the
quadratic reference the banded builder must agree with exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
import scipy.sparse.csgraph

from hypercp import _kernels
from hypercp.errors import CapacityError
from hypercp.geometry import GraphParams, HalfPlanePoint

__all__ = [
    "Graph",
    "build_adjacency",
    "build_adjacency_naive",
    "ball",
    "components",
    "make_star",
    "make_star_halfline",
    "graph_from_edges",
    "attach_vertices",
    "save_graph",
    "load_graph",
]

DEFAULT_MAX_VERTICES = 2_000_000
DEFAULT_MAX_EDGES = 50_000_000


@dataclass
class Graph:
    """Immutable-by-convention vertex array plus CSR adjacency.

    ``points`` is float64 of shape (N, 2) with columns (x, h); ``indptr`` /
    ``indices`` are the usual CSR arrays with per-row sorted neighbor ids.
    """

    points: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    mode: str
    params: GraphParams | None = None
    root_id: int | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def n_edges(self) -> int:
        return len(self.indices) // 2

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @property
    def circumference(self) -> float | None:
        if self.mode == "wrap":
            return self.params.circumference
        return None

    def directed_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(src, dst) arrays listing every directed edge once."""
        src = np.repeat(np.arange(self.n_vertices, dtype=np.int64), self.degrees)
        return src, self.indices

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        k = np.searchsorted(row, v)
        return k < len(row) and row[k] == v


def _as_points(vertices) -> np.ndarray:
    if isinstance(vertices, np.ndarray):
        pts = np.asarray(vertices, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"expected shape (N, 2), got {pts.shape}")
        return pts.copy()
    rows = []
    for p in vertices:
        if isinstance(p, HalfPlanePoint):
            rows.append((p.x, p.h))
        else:
            x, h = p
            rows.append((float(x), float(h)))
    return np.array(rows, dtype=np.float64).reshape(-1, 2)


def _validate_points(pts: np.ndarray, mode: str, params: GraphParams | None) -> float:
    """Mode checks; returns the circumference (0.0 for the infinite model)."""
    if mode not in ("inf", "wrap"):
        raise ValueError(f"mode must be 'inf' or 'wrap', got {mode!r}")
    if params is None:
        raise ValueError("geometric modes need GraphParams")
    if len(pts) and pts[:, 1].min() < 0.0:
        raise ValueError("heights must be >= 0")
    if mode == "wrap":
        if params.n is None:
            raise ValueError("wrapped mode needs params.n")
        circ = params.circumference
        if len(pts) and np.abs(pts[:, 0]).max() > 0.5 * circ * (1 + 1e-12):
            raise ValueError("wrapped-mode x-coordinates must lie in [-pi n/2, pi n/2]")
        return circ
    return 0.0


def _canonical_x(pts: np.ndarray, circumference: float) -> np.ndarray:
    if circumference <= 0.0:
        return pts[:, 0].copy()
    return np.mod(pts[:, 0] + 0.5 * circumference, circumference)


@dataclass
class _BandIndex:
    """Per-band x-sorted views of a point set (canonical x for wrapped mode)."""

    band_ptr: np.ndarray
    xs: np.ndarray
    hs: np.ndarray
    ids: np.ndarray


def _build_bands(xc: np.ndarray, h: np.ndarray) -> _BandIndex:
    band = np.floor(h).astype(np.int64)
    n_bands = int(band.max()) + 1 if len(band) else 1
    order = np.lexsort((xc, band))
    band_sorted = band[order]
    band_ptr = np.searchsorted(band_sorted, np.arange(n_bands + 1))
    return _BandIndex(band_ptr=band_ptr, xs=xc[order], hs=h[order], ids=order.astype(np.int64))


def _query_bands(
    bands: _BandIndex,
    xq: np.ndarray,
    hq: np.ndarray,
    qid: np.ndarray,
    circumference: float,
    max_edges: int,
) -> tuple[np.ndarray, np.ndarray]:
    """CSR rows (indptr, unsorted indices) of the query points."""
    nq = len(xq)
    indptr = np.zeros(nq + 1, dtype=np.int64)
    dummy = np.empty(0, dtype=np.int64)
    _kernels.band_neighbors(
        xq, hq, qid, bands.band_ptr, bands.xs, bands.hs, bands.ids, circumference, 1, indptr, dummy
    )
    np.cumsum(indptr, out=indptr)
    if indptr[-1] > 2 * max_edges:
        raise CapacityError(f"edge budget exceeded: {indptr[-1] // 2} > {max_edges}")
    indices = np.empty(indptr[-1], dtype=np.int64)
    _kernels.band_neighbors(
        xq, hq, qid, bands.band_ptr, bands.xs, bands.hs, bands.ids, circumference, 0, indptr, indices
    )
    return indptr, indices


def build_adjacency(
    vertices,
    mode: str,
    params: GraphParams,
    root_id: int | None = None,
    max_vertices: int = DEFAULT_MAX_VERTICES,
    max_edges: int = DEFAULT_MAX_EDGES,
) -> Graph:
    """Exact adjacency under the <=-rule via the height-band index.

    Output equals the naive quadratic builder on every input; raises
    CapacityError if the configured vertex or edge budget is exceeded.
    """
    pts = _as_points(vertices)
    if len(pts) > max_vertices:
        raise CapacityError(f"vertex budget exceeded: {len(pts)} > {max_vertices}")
    circ = _validate_points(pts, mode, params)
    if len(pts) == 0:
        return Graph(
            points=pts,
            indptr=np.zeros(1, dtype=np.int64),
            indices=np.empty(0, dtype=np.int64),
            mode=mode,
            params=params,
            root_id=root_id,
        )
    xc = _canonical_x(pts, circ)
    h = np.ascontiguousarray(pts[:, 1])
    bands = _build_bands(xc, h)
    qid = np.arange(len(pts), dtype=np.int64)
    indptr, indices = _query_bands(bands, xc, h, qid, circ, max_edges)
    _kernels.sort_rows(indptr, indices)
    return Graph(points=pts, indptr=indptr, indices=indices, mode=mode, params=params, root_id=root_id)


def build_adjacency_naive(vertices, mode: str, params: GraphParams, root_id: int | None = None) -> Graph:
    """Quadratic reference builder: all pairs, no acceleration structure."""
    pts = _as_points(vertices)
    circ = _validate_points(pts, mode, params)
    n = len(pts)
    if n == 0:
        return Graph(
            points=pts,
            indptr=np.zeros(1, dtype=np.int64),
            indices=np.empty(0, dtype=np.int64),
            mode=mode,
            params=params,
            root_id=root_id,
        )
    x = pts[:, 0]
    h = pts[:, 1]
    dx = np.abs(x[:, None] - x[None, :])
    if circ > 0.0:
        dx = np.mod(dx, circ)
        dx = np.minimum(dx, circ - dx)
    thresh = np.exp(0.5 * (h[:, None] + h[None, :]))
    adj = dx <= thresh
    np.fill_diagonal(adj, False)
    rows, cols = np.nonzero(adj)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return Graph(
        points=pts,
        indptr=indptr,
        indices=cols.astype(np.int64),
        mode=mode,
        params=params,
        root_id=root_id,
    )


def ball(g: Graph, v: int, r: int) -> np.ndarray:
    """Sorted ids of the BFS ball B(v, r); always contains v."""
    if not 0 <= v < g.n_vertices:
        raise ValueError(f"vertex {v} out of range")
    if r < 0:
        raise ValueError(f"radius must be >= 0, got {r}")
    dist = _kernels.bfs_distances(g.indptr, g.indices, v)
    return np.flatnonzero((dist >= 0) & (dist <= r)).astype(np.int64)


def components(g: Graph) -> list[np.ndarray]:
    """Connected components as sorted id arrays, ordered by smallest member."""
    if g.n_vertices == 0:
        return []
    mat = scipy.sparse.csr_matrix(
        (np.ones(len(g.indices), dtype=np.int8), g.indices, g.indptr),
        shape=(g.n_vertices, g.n_vertices),
    )
    n_comp, labels = scipy.sparse.csgraph.connected_components(mat, directed=False)
    order = np.argsort(labels, kind="stable")
    boundaries = np.searchsorted(labels[order], np.arange(n_comp + 1))
    comps = [np.sort(order[boundaries[i] : boundaries[i + 1]]) for i in range(n_comp)]
    comps.sort(key=lambda c: c[0])
    return comps


def graph_from_edges(n_vertices: int, edges, points: np.ndarray | None = None) -> Graph:
    """Explicit-mode graph from an undirected edge list."""
    if n_vertices < 1:
        raise ValueError("need at least one vertex")
    edge_arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if len(edge_arr):
        if edge_arr.min() < 0 or edge_arr.max() >= n_vertices:
            raise ValueError("edge endpoint out of range")
        if (edge_arr[:, 0] == edge_arr[:, 1]).any():
            raise ValueError("self-loops are not allowed")
    src = np.concatenate((edge_arr[:, 0], edge_arr[:, 1]))
    dst = np.concatenate((edge_arr[:, 1], edge_arr[:, 0]))
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    if len(src) > 1 and ((src[1:] == src[:-1]) & (dst[1:] == dst[:-1])).any():
        raise ValueError("duplicate edges")
    indptr = np.zeros(n_vertices + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    if points is None:
        points = np.column_stack(
            (np.arange(n_vertices, dtype=np.float64), np.zeros(n_vertices))
        )
    return Graph(points=np.asarray(points, dtype=np.float64), indptr=indptr, indices=dst, mode="explicit")


def make_star(d: int) -> Graph:
    """Star S_d: center 0, leaves 1..d."""
    if d < 1:
        raise ValueError(f"need at least one leaf, got {d}")
    return graph_from_edges(d + 1, [(0, i) for i in range(1, d + 1)])


def make_star_halfline(d: int, m: int) -> Graph:
    """Spine 0..m-1 (a path), each spine vertex with d private leaves.

    Truncation of the half-line-of-stars: m(d+1) vertices, (m-1) + m*d edges.
    Leaf j of spine vertex i has id m + i*d + j.
    """
    if d < 1 or m < 1:
        raise ValueError(f"need d >= 1 and m >= 1, got d={d}, m={m}")
    edges = [(i, i + 1) for i in range(m - 1)]
    for i in range(m):
        edges.extend((i, m + i * d + j) for j in range(d))
    return graph_from_edges(m * (d + 1), edges)


def attach_vertices(g: Graph, extra, max_edges: int = DEFAULT_MAX_EDGES) -> Graph:
    """Append points and recompute all old-new and new-new adjacencies.

    Equals ``build_adjacency`` on the union; the incremental path only scans
    pairs involving a new point.
    """
    if g.mode == "explicit":
        raise ValueError("cannot attach geometric points to an explicit graph")
    extra_pts = _as_points(extra)
    if len(extra_pts) == 0:
        return Graph(
            points=g.points.copy(),
            indptr=g.indptr.copy(),
            indices=g.indices.copy(),
            mode=g.mode,
            params=g.params,
            root_id=g.root_id,
        )
    all_pts = np.vstack((g.points, extra_pts))
    circ = _validate_points(all_pts, g.mode, g.params)
    n_old = g.n_vertices
    n_all = len(all_pts)
    xc = _canonical_x(all_pts, circ)
    h = np.ascontiguousarray(all_pts[:, 1])
    bands = _build_bands(xc, h)
    qid = np.arange(n_old, n_all, dtype=np.int64)
    new_indptr, new_indices = _query_bands(bands, xc[n_old:], h[n_old:], qid, circ, max_edges)

    src_old, dst_old = g.directed_edges()
    src_new = np.repeat(qid, np.diff(new_indptr))
    mirror = new_indices < n_old
    src = np.concatenate((src_old, src_new, new_indices[mirror]))
    dst = np.concatenate((dst_old, new_indices, src_new[mirror]))
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    if len(src) > 2 * max_edges:
        raise CapacityError(f"edge budget exceeded: {len(src) // 2} > {max_edges}")
    indptr = np.zeros(n_all + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    return Graph(points=all_pts, indptr=indptr, indices=dst, mode=g.mode, params=g.params, root_id=g.root_id)


def save_graph(g: Graph, path: str) -> None:
    """Text format: header `hrg v1 alpha=<f> mode=<inf|wrap> n=<f> N=<int> root=<int>`,
    then one `id x h` line per vertex.  Edges are recomputed on load; floats
    are written as shortest round-tripping reprs, so the reload rebuilds the
    identical adjacency.  n=0 encodes the infinite model's absent scale,
    root=-1 an unrooted graph.
    """
    if g.mode == "explicit":
        raise ValueError("explicit graphs have no geometric serialization")
    n_field = 0.0 if g.params.n is None else g.params.n
    root_field = -1 if g.root_id is None else g.root_id
    with open(path, "w", encoding="ascii") as fh:
        fh.write(
            f"hrg v1 alpha={g.params.alpha!r} mode={g.mode} n={n_field!r}"
            f" N={g.n_vertices} root={root_field}\n"
        )
        for i, (x, h) in enumerate(g.points):
            fh.write(f"{i} {float(x)!r} {float(h)!r}\n")


def load_graph(path: str, max_vertices: int = DEFAULT_MAX_VERTICES, max_edges: int = DEFAULT_MAX_EDGES) -> Graph:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 7 or header[0] != "hrg" or header[1] != "v1":
            raise ValueError(f"not a hrg v1 file: {path}")
        fields = dict(part.split("=", 1) for part in header[2:])
        alpha = float(fields["alpha"])
        mode = fields["mode"]
        n_scale = float(fields["n"])
        n_vertices = int(fields["N"])
        root_id = int(fields["root"])
        pts = np.empty((n_vertices, 2), dtype=np.float64)
        for k in range(n_vertices):
            line = fh.readline().split()
            if len(line) != 3:
                raise ValueError(f"truncated vertex list in {path}")
            i = int(line[0])
            if i != k:
                raise ValueError(f"vertex ids must be dense and ordered, got {i} at row {k}")
            pts[k, 0] = float(line[1])
            pts[k, 1] = float(line[2])
    params = GraphParams(alpha=alpha, n=None if n_scale == 0.0 else n_scale)
    return build_adjacency(
        pts,
        mode,
        params,
        root_id=None if root_id < 0 else root_id,
        max_vertices=max_vertices,
        max_edges=max_edges,
    )
