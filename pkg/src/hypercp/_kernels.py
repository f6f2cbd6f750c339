"""Jitted numerical kernels: RNG, adjacency construction, BFS, contact engines.

Everything here is numba-compiled and GIL-free; the public modules wrap these
with validation and friendlier types.  The in-kernel RNG is xoshiro256++
seeded through splitmix64 from a single uint64, implemented with explicit
uint64 arithmetic so draws are bit-stable across platforms.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

U64 = np.uint64

# ---------------------------------------------------------------------------
# RNG: splitmix64 seeding + xoshiro256++ core
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _splitmix64(s):
    s = s + U64(0x9E3779B97F4A7C15)
    z = s
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return s, z ^ (z >> U64(31))


@njit(cache=True)
def seed_state(seed):
    """Expand one uint64 seed into a xoshiro256++ state vector."""
    st = np.empty(4, dtype=np.uint64)
    s = U64(seed)
    for i in range(4):
        s, z = _splitmix64(s)
        st[i] = z
    return st


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << U64(k)) | (x >> (U64(64) - U64(k)))


@njit(cache=True, inline="always")
def _next_u64(st):
    s0 = st[0]
    s1 = st[1]
    s2 = st[2]
    s3 = st[3]
    result = _rotl(s0 + s3, 23) + s0
    t = s1 << U64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    st[0] = s0
    st[1] = s1
    st[2] = s2
    st[3] = s3
    return result


@njit(cache=True, inline="always")
def _uniform(st):
    """Double in [0, 1) with 53 random bits."""
    return (_next_u64(st) >> U64(11)) * 1.1102230246251565e-16


# ---------------------------------------------------------------------------
# Fenwick tree over integer weights (degree-weighted source sampling)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _fen_add(tree, v, delta):
    i = v + 1
    n = tree.size
    while i < n:
        tree[i] += delta
        i += i & (-i)


@njit(cache=True, inline="always")
def _fen_select(tree, top_bit, r):
    """Vertex v with prefix(v) <= r < prefix(v) + w[v]; r integer in [0, total)."""
    pos = 0
    bit = top_bit
    rem = r
    n = tree.size
    while bit > 0:
        nxt = pos + bit
        if nxt < n and tree[nxt] <= rem:
            pos = nxt
            rem -= tree[nxt]
        bit >>= 1
    return pos


# ---------------------------------------------------------------------------
# Contact process engines
#
# Verdict codes: 0 extinct, 1 horizon, 2 escape, 3 mass-cap.
# ``dist`` is the hop distance from the reference vertex (-1 unreachable);
# escape_radius <= 0 disables the escape rule, mass_cap <= 0 disables the
# mass rule.  ``sample_times`` must be sorted and <= t_max; the returned
# trajectory holds |infected| at those times, with -1 for times not reached
# before an escape/mass-cap stop.
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def run_dynamic(indptr, indices, init, lam, t_max, dist, escape_radius, mass_cap, sample_times, seed):
    """Aggregate-rate engine: total rate I + lam*W, W = sum of infected degrees.

    An event is a recovery with probability I/(I + lam*W) (uniform infected
    vertex), else a transmission from a degree-weighted infected source to a
    uniform neighbor (no-op if already infected).  Exact for the contact
    process with recovery rate 1 and per-edge infection rate lam.
    """
    n = indptr.size - 1
    st = seed_state(seed)
    status = np.zeros(n, dtype=np.uint8)
    ever = np.zeros(n, dtype=np.uint8)
    inf_list = np.empty(n, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    tree = np.zeros(n + 1, dtype=np.int64)
    top_bit = 1
    while top_bit * 2 <= n:
        top_bit *= 2

    n_inf = 0
    w_tot = 0
    ever_count = 0
    max_dist = 0
    for k in range(init.size):
        v = init[k]
        if status[v] == 0:
            status[v] = 1
            inf_list[n_inf] = v
            pos[v] = n_inf
            n_inf += 1
            d = indptr[v + 1] - indptr[v]
            _fen_add(tree, v, d)
            w_tot += d
            ever[v] = 1
            ever_count += 1
            if dist[v] > max_dist:
                max_dist = dist[v]

    n_samp = sample_times.size
    traj = np.full(n_samp, -1, dtype=np.int64)
    si = 0
    t = 0.0
    verdict = 1
    if mass_cap > 0 and ever_count >= mass_cap:
        verdict = 3
    elif escape_radius > 0 and max_dist >= escape_radius:
        verdict = 2
    else:
        while True:
            if n_inf == 0:
                verdict = 0
                break
            rate = n_inf + lam * w_tot
            t_new = t + (-math.log(1.0 - _uniform(st)) / rate)
            while si < n_samp and sample_times[si] < t_new:
                traj[si] = n_inf
                si += 1
            if t_new > t_max:
                t = t_max
                verdict = 1
                break
            t = t_new
            u = _uniform(st) * rate
            if u < n_inf:
                j = int(_uniform(st) * n_inf)
                if j == n_inf:
                    j -= 1
                v = inf_list[j]
                status[v] = 0
                last = inf_list[n_inf - 1]
                inf_list[j] = last
                pos[last] = j
                pos[v] = -1
                n_inf -= 1
                d = indptr[v + 1] - indptr[v]
                _fen_add(tree, v, -d)
                w_tot -= d
                if n_inf == 0:
                    verdict = 0
                    break
            else:
                r = np.int64(_uniform(st) * w_tot)
                if r >= w_tot:
                    r = w_tot - 1
                v = _fen_select(tree, top_bit, r)
                d = indptr[v + 1] - indptr[v]
                j = int(_uniform(st) * d)
                if j == d:
                    j -= 1
                w = indices[indptr[v] + j]
                if status[w] == 0:
                    status[w] = 1
                    inf_list[n_inf] = w
                    pos[w] = n_inf
                    n_inf += 1
                    dw = indptr[w + 1] - indptr[w]
                    _fen_add(tree, w, dw)
                    w_tot += dw
                    if ever[w] == 0:
                        ever[w] = 1
                        ever_count += 1
                        if dist[w] > max_dist:
                            max_dist = dist[w]
                        if mass_cap > 0 and ever_count >= mass_cap:
                            verdict = 3
                            break
                        if escape_radius > 0 and dist[w] >= escape_radius:
                            verdict = 2
                            break
    if verdict == 0:
        while si < n_samp:
            traj[si] = 0
            si += 1
    elif verdict == 1:
        while si < n_samp:
            traj[si] = n_inf
            si += 1
    return verdict, t, ever_count, max_dist, traj


@njit(cache=True, nogil=True)
def run_static(indptr, indices, esrc, edst, init, lam, t_max, dist, escape_radius, mass_cap, sample_times, seed):
    """Thinning engine against the static rate bound N + lam * (directed edges).

    Every vertex rings recovery attempts at rate 1 and every directed edge
    rings transmission attempts at rate lam regardless of state; attempts at
    healthy sources are no-ops.  This is the graphical construction run
    forward in time, so it is exact, and per-event cost is O(1).  Efficient
    when a positive fraction of the graph is infected (metastable scans from
    all-infected); use run_dynamic for sparse infections.
    """
    n = indptr.size - 1
    m2 = esrc.size
    st = seed_state(seed)
    status = np.zeros(n, dtype=np.uint8)
    ever = np.zeros(n, dtype=np.uint8)
    n_inf = 0
    ever_count = 0
    max_dist = 0
    for k in range(init.size):
        v = init[k]
        if status[v] == 0:
            status[v] = 1
            n_inf += 1
            ever[v] = 1
            ever_count += 1
            if dist[v] > max_dist:
                max_dist = dist[v]

    n_samp = sample_times.size
    traj = np.full(n_samp, -1, dtype=np.int64)
    si = 0
    t = 0.0
    verdict = 1
    rate = n + lam * m2
    p_rec = n / rate
    if mass_cap > 0 and ever_count >= mass_cap:
        verdict = 3
    elif escape_radius > 0 and max_dist >= escape_radius:
        verdict = 2
    else:
        while True:
            if n_inf == 0:
                verdict = 0
                break
            t_new = t + (-math.log(1.0 - _uniform(st)) / rate)
            while si < n_samp and sample_times[si] < t_new:
                traj[si] = n_inf
                si += 1
            if t_new > t_max:
                t = t_max
                verdict = 1
                break
            t = t_new
            if _uniform(st) < p_rec:
                v = int(_uniform(st) * n)
                if v == n:
                    v -= 1
                if status[v] == 1:
                    status[v] = 0
                    n_inf -= 1
                    if n_inf == 0:
                        verdict = 0
                        break
            else:
                e = np.int64(_uniform(st) * m2)
                if e >= m2:
                    e = m2 - 1
                s = esrc[e]
                if status[s] == 1:
                    w = edst[e]
                    if status[w] == 0:
                        status[w] = 1
                        n_inf += 1
                        if ever[w] == 0:
                            ever[w] = 1
                            ever_count += 1
                            if dist[w] > max_dist:
                                max_dist = dist[w]
                            if mass_cap > 0 and ever_count >= mass_cap:
                                verdict = 3
                                break
                            if escape_radius > 0 and dist[w] >= escape_radius:
                                verdict = 2
                                break
    if verdict == 0:
        while si < n_samp:
            traj[si] = 0
            si += 1
    elif verdict == 1:
        while si < n_samp:
            traj[si] = n_inf
            si += 1
    return verdict, t, ever_count, max_dist, traj


# ---------------------------------------------------------------------------
# BFS hop distances
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def bfs_distances(indptr, indices, src):
    n = indptr.size - 1
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    dist[src] = 0
    queue[tail] = src
    tail += 1
    while head < tail:
        v = queue[head]
        head += 1
        dv = dist[v]
        for e in range(indptr[v], indptr[v + 1]):
            w = indices[e]
            if dist[w] < 0:
                dist[w] = dv + 1
                queue[tail] = w
                tail += 1
    return dist


# ---------------------------------------------------------------------------
# Banded adjacency construction
#
# Points are bucketed into unit height bands [b, b+1).  Band arrays are
# x-sorted; a query against band b uses the conservative reach
# e^{(h + b + 1)/2} (an overestimate by at most e^{1/2}), then the exact
# rule filters candidates.  circumference <= 0 means the infinite model;
# wrapped x-coordinates must be canonical in [0, circumference).
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _lower_bound(a, lo, hi, v):
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True, inline="always")
def _upper_bound(a, lo, hi, v):
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True, nogil=True)
def band_neighbors(xq, hq, qid, band_ptr, xs, hs, ids, circumference, count_only, out_indptr, out_indices):
    """Count or fill neighbor lists of query points against banded arrays.

    With count_only=1, writes per-query neighbor counts into out_indptr[1:].
    With count_only=0, out_indptr must hold the final CSR offsets and the
    neighbor ids are written into out_indices (unsorted).
    """
    nq = xq.size
    nb = band_ptr.size - 1
    for i in range(nq):
        xi = xq[i]
        hi_v = hq[i]
        gid = qid[i]
        c = 0
        cur = out_indptr[i] if count_only == 0 else 0
        for b in range(nb):
            s = band_ptr[b]
            e = band_ptr[b + 1]
            if s == e:
                continue
            reach = math.exp(0.5 * (hi_v + b + 1.0))
            if circumference > 0.0 and 2.0 * reach >= circumference:
                lo0, hi0, lo1, hi1 = s, e, 0, 0
            elif circumference > 0.0:
                a = (xi - reach) % circumference
                if a < 0.0:
                    a += circumference
                bnd = (xi + reach) % circumference
                if bnd < 0.0:
                    bnd += circumference
                if a <= bnd:
                    lo0 = _lower_bound(xs, s, e, a)
                    hi0 = _upper_bound(xs, s, e, bnd)
                    lo1 = 0
                    hi1 = 0
                else:
                    lo0 = _lower_bound(xs, s, e, a)
                    hi0 = e
                    lo1 = s
                    hi1 = _upper_bound(xs, s, e, bnd)
            else:
                lo0 = _lower_bound(xs, s, e, xi - reach)
                hi0 = _upper_bound(xs, s, e, xi + reach)
                lo1 = 0
                hi1 = 0
            for rng_pass in range(2):
                lo = lo0 if rng_pass == 0 else lo1
                hi = hi0 if rng_pass == 0 else hi1
                for k in range(lo, hi):
                    j = ids[k]
                    if j == gid:
                        continue
                    dx = abs(xi - xs[k])
                    if circumference > 0.0 and dx > 0.5 * circumference:
                        dx = circumference - dx
                    if dx <= math.exp(0.5 * (hi_v + hs[k])):
                        if count_only == 0:
                            out_indices[cur] = j
                            cur += 1
                        else:
                            c += 1
        if count_only == 1:
            out_indptr[i + 1] = c


@njit(cache=True, nogil=True)
def sort_rows(indptr, indices):
    n = indptr.size - 1
    for v in range(n):
        s = indptr[v]
        e = indptr[v + 1]
        if e - s > 1:
            indices[s:e].sort()


# ---------------------------------------------------------------------------
# Ordered-trace dynamic program over graphical records
# ---------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def trace_dp(ev_kind, ev_a, ev_b, offsets, path):
    """For each record (events offsets[m]..offsets[m+1], time-sorted): does
    some infection path started at (path[0], 0) have ordered trace exactly
    ``path``?

    alive[i] holds "a path with trace path[0..i] exists and its walker still
    sits unkilled at path[i]"; marks clear matching entries, arrows extend
    prefixes by one, and success latches once the full trace is realized
    (the path may end there, so later marks cannot undo it).  A single arrow
    cannot chain two extensions because consecutive trace entries differ.
    """
    n_rec = offsets.size - 1
    k = path.size - 1
    out = np.zeros(n_rec, dtype=np.uint8)
    alive = np.zeros(k + 1, dtype=np.uint8)
    for m in range(n_rec):
        if k == 0:
            out[m] = 1
            continue
        for i in range(k + 1):
            alive[i] = 0
        alive[0] = 1
        for e in range(offsets[m], offsets[m + 1]):
            a = ev_a[e]
            if ev_kind[e] == 0:
                for i in range(k):
                    if path[i] == a:
                        alive[i] = 0
            else:
                b = ev_b[e]
                for i in range(k):
                    if alive[i] and path[i] == a and path[i + 1] == b:
                        alive[i + 1] = 1
                if alive[k]:
                    out[m] = 1
                    break
    return out


@njit(cache=True, nogil=True)
def run_dynamic_batch(indptr, indices, init, lam, t_max, trials, seed):
    """Repeated aggregate-rate runs: count extinctions and sum their times."""
    n = indptr.size - 1
    dist = np.zeros(n, dtype=np.int64)
    no_samples = np.empty(0, dtype=np.float64)
    extinct = 0
    time_sum = 0.0
    for r in range(trials):
        s = U64(seed) + U64(r) * U64(0x9E3779B97F4A7C15)
        verdict, t, ever, max_dist, traj = run_dynamic(
            indptr, indices, init, lam, t_max, dist, -1, -1, no_samples, s
        )
        if verdict == 0:
            extinct += 1
            time_sum += t
    return extinct, time_sum
