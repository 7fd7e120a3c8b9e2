"""Source-BS selection, routing-line traversal, relay loads and frequency reuse.

A user requesting a partially cached file collects parity bits from the
nearest BSs holding enough of them; bits from every remote source travel
hop by hop through the cells crossed by the straight segment between the
source and the user's BS.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .caching import CachePlan, PopularityProfile, ReplicationVector, is_full
from .topology import NetworkTopology, ranking_arrays


class InfeasibleSourceSet(ValueError):
    """Raised when fewer BSs exist than a file's source set needs."""


def sources_needed(q: float) -> int:
    """``ceil(1/q)``, robust to rounding in ``1/q``."""
    if not q > 0:
        raise ValueError("replication fraction must be positive")
    return max(1, math.ceil(1.0 / q - 1e-9))


@dataclass(frozen=True)
class SourceSet:
    """Source BSs of one (user, file) request and their per-segment shares.

    ``fractions`` are exact shares of a segment; ``load`` is the same split
    in whole bits, with the rounding residue assigned to the user's BS.
    """

    user: int
    file: int | None
    bs: int
    q: float
    r_star: float
    full_set: tuple
    inner_set: tuple
    fractions: dict
    load: dict


def source_shares(topology: NetworkTopology, bs: int, q: float):
    """Source BSs, shares and ``r*`` for a request arriving at BS ``bs``."""
    need = sources_needed(q)
    if need > topology.n_bs:
        raise InfeasibleSourceSet(f"q={q:g} needs {need} source BSs but the network has "
                                  f"{topology.n_bs}")
    order, dist = ranking_arrays(topology, bs)
    tol = topology.length_tol
    r_star = float(dist[need - 1])
    full = order[dist <= r_star + tol]
    inner = order[dist < r_star - tol]
    boundary = full[len(inner):]
    share_b = (1.0 - len(inner) * q) / len(boundary)
    fr = {int(n): q for n in inner}
    for n in boundary:
        fr[int(n)] = share_b
    return r_star, tuple(int(n) for n in full), tuple(int(n) for n in inner), fr


def select_source_set(topology: NetworkTopology, user: int, q_l: float, file=None,
                      L_S: int = 1_000_000) -> SourceSet:
    if not q_l > 0:
        raise ValueError("q_l = 0 is not supported (file would need the wired backhaul)")
    bs = int(topology.association[user])
    r_star, full, inner, fr = source_shares(topology, bs, min(float(q_l), 1.0))
    bits = {n: int(math.floor(f * L_S + 1e-9)) for n, f in fr.items()}
    bits[bs] = bits.get(bs, 0) + (L_S - sum(bits.values()))
    return SourceSet(int(user), file, bs, float(q_l), r_star, full, inner, fr, bits)


# ------------------------------------------------------------------ routing

@dataclass(frozen=True)
class Route:
    """Relay path from ``src`` to ``dst``.

    ``cells`` lists the cells the open segment passes through (point
    contacts excluded). ``hops`` lists ``(tx, rx, weight)``: where the
    segment crosses a vertex between two cells that share no edge, the bits
    are split equally over the cells meeting at that vertex, so every hop
    joins edge-adjacent cells.
    """

    src: int
    dst: int
    cells: tuple
    hops: tuple


def _neighbor_table(topology):
    if "nbr_table" not in topology._cache:
        nb = [topology.neighbors(n) for n in range(topology.n_bs)]
        width = max(1, max(len(x) for x in nb))
        tab = np.full((topology.n_bs, width), -1, dtype=int)
        for n, x in enumerate(nb):
            tab[n, :len(x)] = x
        topology._cache["nbr_table"] = tab
    return topology._cache["nbr_table"]


def _vertex_step(topology, cur, point, direction):
    """Next cell and side cells when the segment leaves ``cur`` through a vertex."""
    pos = topology.bs_positions
    d = np.hypot(*(pos - point).T)
    tol = 1e-7 * topology.area_side
    E = np.flatnonzero(d <= d.min() + tol)
    probe = point + 1e-6 * topology.area_side * direction / np.hypot(*direction)
    cand = [e for e in E if e != cur]
    dp = np.hypot(*(pos[cand] - probe).T)
    nxt = int(cand[int(np.argmin(dp))])
    sides = ()
    if nxt not in topology.neighbors(cur) and len(E) >= 4:
        sides = tuple(int(e) for e in E if e not in (cur, nxt)
                      and e in topology.neighbors(cur) and nxt in topology.neighbors(int(e)))
    return nxt, sides


def _walk(topology, src_arr, dst_arr):
    """Trace many segments at once; returns lists of (cur, next, sides) stages."""
    pos = topology.bs_positions
    tab = _neighbor_table(topology)
    M = len(src_arr)
    A = pos[src_arr]
    D = pos[dst_arr] - A
    cur = np.array(src_arr, dtype=int)
    stages = [[] for _ in range(M)]
    active = cur != dst_arr
    for _ in range(4 * topology.n_bs + 8):
        idx = np.flatnonzero(active)
        if len(idx) == 0:
            return stages
        c = cur[idx]
        nb = tab[c]
        valid = nb >= 0
        xj = pos[c][:, None, :]
        xi = pos[np.where(valid, nb, 0)]
        diff = xi - xj
        a = 2.0 * np.einsum("mk,mdk->md", D[idx], diff)
        cc = (np.sum(xi * xi, -1) - np.sum(xj * xj, -1) - 2.0 * np.einsum("mk,mdk->md", A[idx], diff))
        scale = np.hypot(*D[idx].T)[:, None] * np.hypot(diff[..., 0], diff[..., 1])
        ok = valid & (a > 1e-12 * np.maximum(scale, 1e-300))
        t = np.where(ok, cc / np.where(ok, a, 1.0), np.inf)
        tmin = t.min(axis=1)
        if np.any(~np.isfinite(tmin)):
            raise RuntimeError("segment left the triangulated region")
        binding = np.abs(t - tmin[:, None]) <= 1e-9
        nbind = binding.sum(axis=1)
        for m, k in enumerate(idx):
            if nbind[m] == 1:
                nxt = int(nb[m][binding[m]][0])
                sides = ()
            else:
                point = A[k] + tmin[m] * D[k]
                nxt, sides = _vertex_step(topology, int(c[m]), point, D[k])
            stages[k].append((int(c[m]), nxt, sides))
            cur[k] = nxt
            if nxt == dst_arr[k]:
                active[k] = False
    raise RuntimeError("route tracing did not terminate")


def _route_from_stages(src, dst, st):
    cells = [int(src)] + [int(s[1]) for s in st]
    hops = []
    for u, v, sides in st:
        u, v = int(u), int(v)
        if sides:
            w = 1.0 / len(sides)
            for s in sides:
                hops.append((u, int(s), w))
                hops.append((int(s), v, w))
        else:
            hops.append((u, v, 1.0))
    return Route(int(src), int(dst), tuple(cells), tuple(hops))


def _grid_shape(topology):
    n = int(round(math.sqrt(topology.n_bs)))
    return n


def trace_routes(topology: NetworkTopology, pairs) -> dict:
    """Routes for many ``(src, dst)`` pairs, cached on the topology."""
    cache = topology._cache.setdefault("routes", {})
    todo = [(int(s), int(d)) for s, d in pairs if (int(s), int(d)) not in cache and s != d]
    todo = list(dict.fromkeys(todo))
    if todo and topology.is_regular:
        n = _grid_shape(topology)
        offs = topology._cache.setdefault("route_offsets", {})
        need = {}
        for s, d in todo:
            sx, sy, dx, dy = s % n, s // n, d % n, d // n
            key = (dx - sx, dy - sy)
            if key not in offs and key not in need:
                need[key] = (s, d)
        if need:
            src = np.array([v[0] for v in need.values()])
            dst = np.array([v[1] for v in need.values()])
            for key, s, d, st in zip(need, src, dst, _walk(topology, src, dst)):
                r = _route_from_stages(s, d, st)
                offs[key] = (s, r)
        for s, d in todo:
            key = ((d % n) - (s % n), (d // n) - (s // n))
            s0, r0 = offs[key]
            shift = int(s - s0)
            cache[(s, d)] = Route(s, d, tuple(c + shift for c in r0.cells),
                                  tuple((u + shift, v + shift, w) for u, v, w in r0.hops))
    elif todo:
        src = np.array([p[0] for p in todo])
        dst = np.array([p[1] for p in todo])
        for chunk in range(0, len(todo), 4096):
            sl = slice(chunk, chunk + 4096)
            for s, d, st in zip(src[sl], dst[sl], _walk(topology, src[sl], dst[sl])):
                cache[(int(s), int(d))] = _route_from_stages(int(s), int(d), st)
    return {(int(s), int(d)): cache[(int(s), int(d))] for s, d in pairs if s != d}


def route(topology: NetworkTopology, src_bs: int, dst_bs: int) -> Route:
    if src_bs == dst_bs:
        raise ValueError("source and destination must differ")
    return trace_routes(topology, [(src_bs, dst_bs)])[(int(src_bs), int(dst_bs))]


def trace_route(topology: NetworkTopology, src_bs: int, dst_bs: int) -> list:
    """Cells crossed by the segment from ``src_bs`` to ``dst_bs`` in order of entry."""
    return list(route(topology, src_bs, dst_bs).cells)


ROUTE_CSV_HEADER = "user,src_bs,hop_index,cell"


def route_dump_csv(topology: NetworkTopology, source_sets) -> str:
    rows = [ROUTE_CSV_HEADER]
    for ss in source_sets:
        for n in ss.full_set:
            if n == ss.bs:
                continue
            for h, cell in enumerate(trace_route(topology, n, ss.bs)):
                rows.append(f"{ss.user},{n},{h},{cell}")
    return "\n".join(rows) + "\n"


# ------------------------------------------------------------------ frequency reuse

@dataclass(frozen=True)
class FrequencyPlan:
    band: str
    reuse_radius: float
    n_subbands: int
    coloring: np.ndarray

    def co_channel(self, n: int) -> np.ndarray:
        """Other BSs sharing BS ``n``'s subband."""
        same = np.flatnonzero(self.coloring == self.coloring[n])
        return same[same != n]

    def csv(self) -> str:
        return "bs,subband\n" + "".join(f"{n},{c}\n" for n, c in enumerate(self.coloring))


def lemma_color_bound(reuse_radius: float, r_min: float) -> float:
    """Degree-based bound ``(2 r_I / r_min + 1)^2 + 1`` on the subband count."""
    return (2.0 * reuse_radius / r_min + 1.0) ** 2 + 1.0


def color_frequencies(topology: NetworkTopology, reuse_radius: float, r_min: float | None = None,
                      band: str = "inter-BS", method: str = "greedy") -> FrequencyPlan:
    """Assign subbands so BSs within ``reuse_radius`` of each other differ.

    ``method="greedy"`` visits BSs in index order and takes the lowest free
    colour. ``method="tiling"`` (regular grids only) uses the periodic pattern
    with the smallest period ``p`` such that ``p r_0 > reuse_radius``.
    """
    if method == "tiling":
        if not topology.is_regular:
            raise ValueError("tiling colouring needs a regular grid")
        n = _grid_shape(topology)
        period = int(math.floor(reuse_radius / topology.cell_pitch + 1e-9)) + 1
        ix = np.arange(topology.n_bs) % n
        iy = np.arange(topology.n_bs) // n
        colors = (ix % period) * period + (iy % period)
    elif method == "greedy":
        d = topology.bs_distances()
        conflict = d <= reuse_radius * (1 + 1e-12)
        colors = np.full(topology.n_bs, -1, dtype=int)
        for n in range(topology.n_bs):
            used = set(colors[conflict[n] & (colors >= 0)].tolist())
            c = 0
            while c in used:
                c += 1
            colors[n] = c
    else:
        raise ValueError(f"unknown colouring method {method!r}")
    colors = np.asarray(colors, dtype=int)
    # relabel to 0..M-1 in order of first use
    _, first = np.unique(colors, return_index=True)
    relabel = {int(colors[i]): k for k, i in enumerate(sorted(first))}
    colors = np.array([relabel[int(c)] for c in colors], dtype=int)
    return FrequencyPlan(band, float(reuse_radius), int(colors.max()) + 1, colors)


def condition_violations(topology: NetworkTopology, plan: FrequencyPlan) -> list:
    """Pairs of BSs within the reuse radius that share a subband."""
    d = topology.bs_distances()
    same = plan.coloring[:, None] == plan.coloring[None, :]
    bad = np.argwhere(np.triu(same & (d <= plan.reuse_radius * (1 + 1e-12)), 1))
    return [tuple(map(int, p)) for p in bad]


# ------------------------------------------------------------------ relay loads

def relay_load_bound(q: ReplicationVector | np.ndarray, p: PopularityProfile | np.ndarray,
                     r_max: float, r_min: float, k_max: int) -> float:
    """``J = sum_l p_l ((4 sqrt(ceil(1/q_l) - 1) + 2) r_max / r_min + 1)^2 k_max``."""
    qv = np.asarray(q.q if isinstance(q, ReplicationVector) else q, dtype=float)
    pv = np.asarray(p.p if isinstance(p, PopularityProfile) else p, dtype=float)
    if np.any(qv <= 0):
        raise ValueError("replication entries must be positive")
    need = np.array([sources_needed(x) for x in qv], dtype=float)
    term = ((4.0 * np.sqrt(need - 1.0) + 2.0) * r_max / r_min + 1.0) ** 2 * k_max
    return float(np.sum(pv * term))


@dataclass
class LoadModel:
    """Linear map from per-(BS, replication class) request counts to relay loads.

    ``classes`` holds the distinct replication fractions of multihop-mode
    files. ``link_matrix[c]`` is a sparse ``(N, n_links)`` matrix whose row
    ``b`` gives the relayed segment fractions on every directed link for one
    request of class ``c`` arriving at BS ``b``; ``cell_hits[c]`` is the
    ``(N, N)`` 0/1 matrix of cells touched by that request's segments.
    """

    classes: np.ndarray
    links: np.ndarray
    link_matrix: list
    cell_hits: list
    r_star: np.ndarray


def _class_shares(topology, q):
    N = topology.n_bs
    rows, cols, vals, rstar = [], [], [], np.zeros(N)
    for b in range(N):
        r, full, _, fr = source_shares(topology, b, q)
        rstar[b] = r
        for n, f in fr.items():
            if n != b:
                rows.append(b)
                cols.append(n)
                vals.append(f)
    return rows, cols, vals, rstar


def build_load_model(topology: NetworkTopology, q_classes, link_index=None) -> LoadModel:
    """Precompute relay loads for each distinct replication fraction."""
    N = topology.n_bs
    q_classes = np.asarray(sorted(set(float(x) for x in q_classes)), dtype=float)
    per_class, pairs = [], set()
    for q in q_classes:
        rows, cols, vals, rstar = _class_shares(topology, q)
        per_class.append((rows, cols, vals, rstar))
        pairs.update(zip(cols, rows))
    routes = trace_routes(topology, sorted(pairs))
    if link_index is None:
        links = sorted({(u, v) for r in routes.values() for u, v, _ in r.hops})
        link_index = {lk: i for i, lk in enumerate(links)}
    links = np.array(sorted(link_index, key=link_index.get), dtype=int).reshape(-1, 2)
    n_links = len(links)
    mats, hits, rstars = [], [], []
    for rows, cols, vals, rstar in per_class:
        li, lj, lv = [], [], []
        hi, hj = [], []
        for b, n, f in zip(rows, cols, vals):
            r = routes[(n, b)]
            for u, v, w in r.hops:
                li.append(b)
                lj.append(link_index[(u, v)])
                lv.append(f * w)
            hi.extend([b] * len(r.cells))
            hj.extend(r.cells)
        mats.append(sparse.csr_matrix((lv, (li, lj)), shape=(N, n_links)))
        h = sparse.csr_matrix((np.ones(len(hi)), (hi, hj)), shape=(N, N))
        h.data[:] = 1.0   # duplicates were summed; a cell counts once per user
        hits.append(h)
        rstars.append(rstar)
    return LoadModel(q_classes, links, mats, hits, np.array(rstars).reshape(len(q_classes), N))


def class_request_weights(topology: NetworkTopology, plan: CachePlan, p: np.ndarray,
                          classes: np.ndarray, requests=None):
    """Expected (or observed) requests per (class, BS).

    Without ``requests`` the result is the expectation ``users(b) * mass(c)``;
    with a ``(draws, K)`` array of file indices it is the average over draws.
    Returns an array ``(n_classes, N)``.
    """
    q = plan.q
    cls_of_file = np.full(len(q), -1)
    for c, qc in enumerate(classes):
        cls_of_file[(np.abs(q - qc) <= 1e-15) & ~is_full(q)] = c
    N = topology.n_bs
    out = np.zeros((len(classes), N))
    if requests is None:
        users = topology.users_per_cell().astype(float)
        for c in range(len(classes)):
            out[c] = users * float(np.sum(p[cls_of_file == c]))
        return out
    req = np.atleast_2d(np.asarray(requests)) - 1
    for row in req:
        c = cls_of_file[row]
        m = c >= 0
        np.add.at(out, (c[m], topology.association[m]), 1.0)
    return out / len(req)


def measure_relay_load(model: LoadModel, weights: np.ndarray):
    """Per-cell user counts and per-link loads (segment fractions per unit rate).

    ``weights[c, b]`` is the (mean) number of requests of class ``c`` at BS
    ``b``; the result is ``(cell_counts, link_loads)``.
    """
    N = weights.shape[1]
    counts = np.zeros(N)
    loads = np.zeros(len(model.links))
    for c in range(len(model.classes)):
        counts += model.cell_hits[c].T @ weights[c]
        loads += model.link_matrix[c].T @ weights[c]
    return counts, loads
