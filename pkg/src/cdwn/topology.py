"""Base-station and user placement, cells and user association.

Two families of networks are supported: the regular square-lattice network
(every BS has four users placed on the grid lines around it) and a
perturbed-grid random network where BSs are jittered around lattice
intersections and users are dropped one by one into randomly chosen cells.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

REJECTION_CAP = 10_000


@dataclass(frozen=True)
class PlacementParams:
    """Placement constants of a dense network.

    Parameters
    ----------
    n_bs, n_users : int
        Number of base stations ``N`` and users ``K``.
    r_min : float
        Minimum BS-BS distance (m).
    r_max : float
        Maximum distance from any point of a cell to its BS (m).
    d_min : float
        Minimum BS-user distance (m).
    k_max : int
        Maximum number of users per cell.
    n_backhaul : int
        Number of BSs with a wired payload backhaul ``N_0``.
    cell_pitch : float
        Lattice pitch ``r_0`` (m).
    """

    n_bs: int
    n_users: int
    r_min: float
    r_max: float
    d_min: float
    k_max: int
    n_backhaul: int
    cell_pitch: float

    def __post_init__(self):
        for name in ("r_min", "r_max", "d_min", "cell_pitch"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.d_min >= self.r_max:
            raise ValueError("d_min must be smaller than r_max")
        if self.n_bs < 1 or self.n_users < 0:
            raise ValueError("need at least one BS and a nonnegative user count")
        if not 0 <= self.n_backhaul <= self.n_bs:
            raise ValueError("n_backhaul must lie in [0, n_bs]")
        if self.k_max < 1:
            raise ValueError("k_max must be at least 1")


@dataclass
class NetworkTopology:
    """Positions, association and wired-backhaul set of a network.

    ``association[k]`` is the index of the BS nearest to user ``k`` (lowest
    index on ties). ``user_offset`` is the BS-user distance ``d_0`` for
    regular networks and ``None`` otherwise.
    """

    bs_positions: np.ndarray
    user_positions: np.ndarray
    area_side: float
    association: np.ndarray
    backhaul_set: tuple
    cell_kind: str = "voronoi"
    cell_pitch: float = 1.0
    user_offset: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.bs_positions = np.asarray(self.bs_positions, dtype=float).reshape(-1, 2)
        self.user_positions = np.asarray(self.user_positions, dtype=float).reshape(-1, 2)
        self.association = np.asarray(self.association, dtype=int).reshape(-1)
        self.backhaul_set = tuple(sorted(int(b) for b in self.backhaul_set))
        if self.cell_kind not in ("voronoi", "square-grid"):
            raise ValueError(f"unknown cell kind {self.cell_kind!r}")
        if len(self.association) != len(self.user_positions):
            raise ValueError("association length must equal the number of users")

    @property
    def n_bs(self) -> int:
        return len(self.bs_positions)

    @property
    def n_users(self) -> int:
        return len(self.user_positions)

    @property
    def is_regular(self) -> bool:
        return self.cell_kind == "square-grid"

    def users_per_cell(self) -> np.ndarray:
        return np.bincount(self.association, minlength=self.n_bs)

    def bs_distances(self) -> np.ndarray:
        """Pairwise BS-BS distance matrix."""
        if "bs_dist" not in self._cache:
            diff = self.bs_positions[:, None, :] - self.bs_positions[None, :, :]
            self._cache["bs_dist"] = np.hypot(diff[..., 0], diff[..., 1])
        return self._cache["bs_dist"]

    def user_bs_distances(self) -> np.ndarray:
        """``(K, N)`` matrix of user-BS distances."""
        if "ue_dist" not in self._cache:
            diff = self.user_positions[:, None, :] - self.bs_positions[None, :, :]
            self._cache["ue_dist"] = np.hypot(diff[..., 0], diff[..., 1])
        return self._cache["ue_dist"]

    def cells(self):
        """Cell polygons and Voronoi adjacency (cached)."""
        if "cells" not in self._cache:
            self._cache["cells"] = _build_cells(self.bs_positions, self.area_side)
        return self._cache["cells"]

    def cell_polygon(self, n: int) -> np.ndarray:
        return self.cells()[0][n]

    def neighbors(self, n: int) -> tuple:
        """BSs whose cells share an edge of positive length with cell ``n``."""
        return self.cells()[1][n]

    @property
    def length_tol(self) -> float:
        return 1e-9 * self.area_side


@dataclass
class PlacementReport:
    min_bs_pairwise_distance: float
    min_bs_user_distance: float
    max_point_to_bs_distance: float
    max_users_per_cell: int
    users_per_bs_ratio: float
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


# ---------------------------------------------------------------- cells

def _clip_polygon(verts, labels, a, c, label, tol):
    """Clip a convex polygon to the half-plane ``a . p <= c``.

    ``labels[i]`` names the edge from vertex ``i`` to vertex ``i + 1``.
    """
    s = (verts @ a - c) / np.hypot(*a)
    if np.all(s <= tol):
        return verts, labels
    out_v, out_l = [], []
    n = len(verts)
    for i in range(n):
        j = (i + 1) % n
        si, sj = s[i], s[j]
        if si <= tol:
            out_v.append(verts[i])
            out_l.append(labels[i])
            if sj > tol:
                x = verts[i] + (verts[j] - verts[i]) * (si / (si - sj))
                out_v.append(x)
                out_l.append(label)
        elif sj <= tol:
            x = verts[i] + (verts[j] - verts[i]) * (si / (si - sj))
            out_v.append(x)
            out_l.append(labels[i])
    if not out_v:
        return np.empty((0, 2)), []
    verts = np.array(out_v)
    # drop zero-length edges (e.g. bisectors that only touch a corner)
    keep_v, keep_l = [], []
    m = len(verts)
    for i in range(m):
        if np.hypot(*(verts[(i + 1) % m] - verts[i])) > tol:
            keep_v.append(verts[i])
            keep_l.append(out_l[i])
    return np.array(keep_v).reshape(-1, 2), keep_l


def _build_cells(bs, side):
    n_bs = len(bs)
    tol = 1e-9 * side
    square = np.array([[0.0, 0.0], [side, 0.0], [side, side], [0.0, side]])
    polys, nbrs = [], []
    for n in range(n_bs):
        verts, labels = square.copy(), [-1, -1, -1, -1]
        d = np.hypot(*(bs - bs[n]).T)
        order = np.argsort(d, kind="stable")
        for m in order:
            if m == n:
                continue
            reach = np.max(np.hypot(*(verts - bs[n]).T)) if len(verts) else 0.0
            if d[m] > 2 * reach + tol:
                break
            a = bs[m] - bs[n]
            c = 0.5 * (bs[m] @ bs[m] - bs[n] @ bs[n])
            verts, labels = _clip_polygon(verts, labels, a, c, int(m), tol)
        polys.append(verts)
        nbrs.append(tuple(sorted({lab for lab in labels if lab >= 0})))
    return polys, nbrs


def _point_in_convex(poly, pt):
    edges = np.roll(poly, -1, axis=0) - poly
    rel = pt - poly
    cross = edges[:, 0] * rel[:, 1] - edges[:, 1] * rel[:, 0]
    return bool(np.all(cross >= 0))


# ---------------------------------------------------------------- helpers

def associate(bs_positions, user_positions) -> np.ndarray:
    """Nearest-BS association; ties go to the lowest BS index."""
    bs = np.asarray(bs_positions, float).reshape(-1, 2)
    ue = np.asarray(user_positions, float).reshape(-1, 2)
    if len(ue) == 0:
        return np.zeros(0, dtype=int)
    diff = ue[:, None, :] - bs[None, :, :]
    d = np.hypot(diff[..., 0], diff[..., 1])
    # argmin returns the first minimum, i.e. the lowest index on exact ties
    return np.argmin(d, axis=1)


def backhaul_nearest_centroid(bs_positions, area_side, n_backhaul) -> tuple:
    """The ``n_backhaul`` BSs closest to the centre of the area."""
    bs = np.asarray(bs_positions, float).reshape(-1, 2)
    d = np.hypot(*(bs - 0.5 * area_side).T)
    order = np.lexsort((np.arange(len(bs)), d))
    return tuple(sorted(int(i) for i in order[:n_backhaul]))


def _snap(d, scale):
    q = 1e-9 * scale
    return np.round(np.asarray(d) / q) * q


def ranking_arrays(topology: NetworkTopology, bs: int):
    """Indices and distances of all BSs sorted by distance from ``bs``."""
    d = topology.bs_distances()[bs]
    order = np.lexsort((np.arange(topology.n_bs), _snap(d, topology.area_side)))
    return order, d[order]


def nearest_bs_ranking(topology: NetworkTopology, bs: int) -> list:
    """All BSs sorted by distance from ``bs`` (ties by index), self first."""
    if not 0 <= bs < topology.n_bs:
        raise IndexError(f"BS index {bs} out of range")
    order, dist = ranking_arrays(topology, bs)
    return [(int(i), float(r)) for i, r in zip(order, dist)]


# ---------------------------------------------------------------- generators

def generate_regular(n_side: int, r_0: float, d_0: float, n_backhaul: int = 1,
                     backhaul=None) -> NetworkTopology:
    """Square-lattice network with four users per BS.

    BS ``n = iy * n_side + ix`` sits at ``((ix + 1/2) r_0, (iy + 1/2) r_0)``
    and its users are at distance ``d_0`` in the +x, +y, -x and -y
    directions, in that order (user ``4n + m``).
    """
    if n_side < 2:
        raise ValueError("n_side must be at least 2")
    if not r_0 > 0:
        raise ValueError("r_0 must be positive")
    if not 0 < d_0 < r_0 / 2:
        raise ValueError("the user offset d_0 must satisfy 0 < d_0 < r_0/2")
    ix, iy = np.meshgrid(np.arange(n_side), np.arange(n_side))
    bs = np.column_stack([(ix.ravel() + 0.5) * r_0, (iy.ravel() + 0.5) * r_0])
    offsets = d_0 * np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    users = (bs[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
    assoc = np.repeat(np.arange(len(bs)), 4)
    side = n_side * r_0
    if backhaul is None:
        backhaul = backhaul_nearest_centroid(bs, side, n_backhaul)
    return NetworkTopology(bs, users, side, assoc, tuple(backhaul),
                           cell_kind="square-grid", cell_pitch=r_0, user_offset=d_0)


def generate_perturbed_grid(params: PlacementParams, jitter_side: float, rng_seed: int,
                            backhaul=None) -> NetworkTopology:
    """Random network: jittered lattice BSs, users dropped cell by cell."""
    n_side = int(round(math.sqrt(params.n_bs)))
    if n_side * n_side != params.n_bs:
        raise ValueError("n_bs must be a perfect square for the perturbed grid")
    if jitter_side < 0:
        raise ValueError("jitter_side must be nonnegative")
    if jitter_side > params.cell_pitch - params.r_min + 1e-12:
        raise ValueError("jitter_side must not exceed cell_pitch - r_min")
    if params.n_users > params.n_bs * params.k_max:
        raise ValueError("more users than the cells can hold (n_users > n_bs * k_max)")
    rng = np.random.default_rng(rng_seed)
    r0 = params.cell_pitch
    side = n_side * r0
    ix, iy = np.meshgrid(np.arange(n_side), np.arange(n_side))
    centres = np.column_stack([(ix.ravel() + 0.5) * r0, (iy.ravel() + 0.5) * r0])
    bs = centres + rng.uniform(-0.5, 0.5, size=centres.shape) * jitter_side
    topo = NetworkTopology(bs, np.zeros((0, 2)), side, np.zeros(0, int), (), cell_pitch=r0)
    polys = topo.cells()[0]

    counts = np.zeros(params.n_bs, dtype=int)
    users = np.empty((params.n_users, 2))
    for k in range(params.n_users):
        open_cells = np.flatnonzero(counts < params.k_max)
        n = int(open_cells[rng.integers(len(open_cells))])
        poly = polys[n]
        lo, hi = poly.min(axis=0), poly.max(axis=0)
        for _ in range(REJECTION_CAP):
            pt = rng.uniform(lo, hi)
            if np.hypot(*(pt - bs[n])) >= params.d_min and _point_in_convex(poly, pt):
                break
        else:
            raise RuntimeError(f"could not place user {k} in cell {n} after "
                               f"{REJECTION_CAP} attempts")
        users[k] = pt
        counts[n] += 1

    assoc = associate(bs, users)
    if backhaul is None:
        backhaul = backhaul_nearest_centroid(bs, side, params.n_backhaul)
    out = NetworkTopology(bs, users, side, assoc, tuple(backhaul), cell_pitch=r0)
    out._cache["cells"] = topo._cache["cells"]
    return out


def placement_params_regular(n_side: int, r_0: float, d_0: float, n_backhaul: int = 1):
    """Placement constants satisfied by :func:`generate_regular`."""
    return PlacementParams(n_bs=n_side ** 2, n_users=4 * n_side ** 2, r_min=r_0,
                           r_max=r_0 / math.sqrt(2), d_min=d_0, k_max=4,
                           n_backhaul=n_backhaul, cell_pitch=r_0)


# ---------------------------------------------------------------- validation

def validate_placement(topology: NetworkTopology, params: PlacementParams) -> PlacementReport:
    """Check the four geometric placement rules and report the K/N ratio."""
    tol = topology.length_tol
    violations = []
    bs, ue = topology.bs_positions, topology.user_positions
    n_bs = topology.n_bs

    dd = topology.bs_distances() + np.diag(np.full(n_bs, np.inf))
    min_bs = float(dd.min()) if n_bs > 1 else math.inf
    bad = np.argwhere(np.triu(dd < params.r_min - tol, 1))
    if len(bad):
        violations.append(("bs_distance", [tuple(map(int, p)) for p in bad]))

    if topology.n_users:
        du = topology.user_bs_distances()
        min_ue = float(du.min())
        bad = np.argwhere(du < params.d_min - tol)
        if len(bad):
            violations.append(("bs_user_distance", [tuple(map(int, p)) for p in bad]))
    else:
        min_ue = math.inf

    polys = topology.cells()[0]
    reach = np.array([np.max(np.hypot(*(p - bs[n]).T)) for n, p in enumerate(polys)])
    bad = np.flatnonzero(reach > params.r_max + tol)
    if len(bad):
        violations.append(("cell_radius", [int(i) for i in bad]))

    counts = topology.users_per_cell()
    bad = np.flatnonzero(counts > params.k_max)
    if len(bad):
        violations.append(("cell_load", [int(i) for i in bad]))

    outside = np.flatnonzero(np.any((np.vstack([bs, ue]) < -tol)
                                    | (np.vstack([bs, ue]) > topology.area_side + tol), axis=1))
    if len(outside):
        violations.append(("outside_area", [int(i) for i in outside]))

    return PlacementReport(
        min_bs_pairwise_distance=min_bs,
        min_bs_user_distance=min_ue,
        max_point_to_bs_distance=float(reach.max()),
        max_users_per_cell=int(counts.max()) if len(counts) else 0,
        users_per_bs_ratio=topology.n_users / n_bs,
        violations=violations,
    )


# ---------------------------------------------------------------- text format

def dumps_topology(topology: NetworkTopology) -> str:
    out = io.StringIO()
    out.write(f"# area_side {topology.area_side:.6f}\n")
    out.write(f"# cell_kind {topology.cell_kind}\n")
    out.write(f"# cell_pitch {topology.cell_pitch:.6f}\n")
    if topology.user_offset is not None:
        out.write(f"# user_offset {topology.user_offset:.6f}\n")
    wired = set(topology.backhaul_set)
    for n, (x, y) in enumerate(topology.bs_positions):
        out.write(f"BS {n} {x:.6f} {y:.6f} {int(n in wired)}\n")
    for k, (x, y) in enumerate(topology.user_positions):
        out.write(f"UE {k} {x:.6f} {y:.6f} {int(topology.association[k])}\n")
    return out.getvalue()


def loads_topology(text: str) -> NetworkTopology:
    meta = {}
    bs, ue = {}, {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2:
                meta[parts[0]] = parts[1]
            continue
        parts = line.split()
        if parts[0] == "BS" and len(parts) == 5:
            bs[int(parts[1])] = (float(parts[2]), float(parts[3]), int(parts[4]))
        elif parts[0] == "UE" and len(parts) == 5:
            ue[int(parts[1])] = (float(parts[2]), float(parts[3]), int(parts[4]))
        else:
            raise ValueError(f"malformed topology record: {raw!r}")
    if sorted(bs) != list(range(len(bs))) or sorted(ue) != list(range(len(ue))):
        raise ValueError("node ids must be contiguous from 0")
    bs_pos = np.array([bs[i][:2] for i in range(len(bs))]).reshape(-1, 2)
    ue_pos = np.array([ue[i][:2] for i in range(len(ue))]).reshape(-1, 2)
    assoc = np.array([ue[i][2] for i in range(len(ue))], dtype=int)
    wired = tuple(i for i in range(len(bs)) if bs[i][2])
    side = float(meta.get("area_side", np.max(np.vstack([bs_pos, ue_pos])) if len(bs) else 1.0))
    offset = meta.get("user_offset")
    return NetworkTopology(bs_pos, ue_pos, side, assoc, wired,
                           cell_kind=meta.get("cell_kind", "voronoi"),
                           cell_pitch=float(meta.get("cell_pitch", 1.0)),
                           user_offset=None if offset is None else float(offset))


def write_topology(topology: NetworkTopology, path) -> None:
    Path(path).write_text(dumps_topology(topology))


def read_topology(path) -> NetworkTopology:
    return loads_topology(Path(path).read_text())
