"""Cache-induced cooperative MIMO: clusters, scheduling and cluster rates.

BSs that all hold the same parity block of a fully cached file can precode
jointly. The area is tiled by squares of ``N_c`` cells (shifted randomly
every slot); the BSs of one square serve up to as many users as they have
antennas with zero-forcing beams, and other clusters act as noise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, PhaseDraw, lattice_interference_sum
from .topology import NetworkTopology

GUARD_CONSTANT = 0.25


@dataclass(frozen=True)
class ClusterPlan:
    """Square clusters for one slot.

    ``cluster_of_bs[n]`` is the cluster id of BS ``n``; ``members[j]`` lists
    the BSs of cluster ``j`` and ``bounds[j]`` its square
    ``(x0, y0, x1, y1)`` clipped to the area.
    """

    n_c: int
    side: float
    offset: tuple
    cluster_of_bs: np.ndarray
    members: tuple
    bounds: np.ndarray
    area_side: float
    guard_distance: float

    @property
    def cluster_area(self) -> float:
        return self.side ** 2

    @property
    def n_clusters(self) -> int:
        return len(self.members)


def guard_distance(N_c: int, r_0: float, alpha: float, constant: float = GUARD_CONSTANT) -> float:
    """Guard width ``constant * r_0 * N_c**(1 / (2 (alpha - 1)))``."""
    return constant * r_0 * N_c ** (1.0 / (2.0 * (alpha - 1.0)))


def form_clusters(topology: NetworkTopology, N_c: int, slot_offset=(0.0, 0.0),
                  alpha: float = 3.5, guard_constant: float = GUARD_CONSTANT) -> ClusterPlan:
    """Tile the area with squares of area ``N_c r_0^2`` shifted by ``slot_offset``."""
    if N_c < 1:
        raise ValueError("cluster size must be at least 1")
    r0 = topology.cell_pitch
    side = math.sqrt(N_c) * r0
    if side > topology.area_side * (1 + 1e-12):
        raise ValueError("cluster squares are larger than the area")
    ox, oy = (float(v) % side for v in slot_offset)
    pos = topology.bs_positions
    # squares are [ox + (i-1) side, ox + i side); shift so indices start at 0
    ix = np.floor((pos[:, 0] - ox) / side + 1e-12).astype(int) + 1
    iy = np.floor((pos[:, 1] - oy) / side + 1e-12).astype(int) + 1
    keys = ix * 100_003 + iy
    uniq, inv = np.unique(keys, return_inverse=True)
    members, bounds = [], []
    for j, key in enumerate(uniq):
        mem = np.flatnonzero(inv == j)
        members.append(mem)
        i, k = ix[mem[0]], iy[mem[0]]
        x0, y0 = ox + (i - 1) * side, oy + (k - 1) * side
        bounds.append((max(x0, 0.0), max(y0, 0.0),
                       min(x0 + side, topology.area_side), min(y0 + side, topology.area_side)))
    return ClusterPlan(int(N_c), side, (ox, oy), inv.astype(int), tuple(members),
                       np.array(bounds), topology.area_side,
                       guard_distance(N_c, r0, alpha, guard_constant))


def distance_to_cluster_edge(plan: ClusterPlan, points: np.ndarray, clusters: np.ndarray) -> np.ndarray:
    """Distance from each point to the inner edges of its cluster (area border ignored)."""
    b = plan.bounds[clusters]
    A = plan.area_side
    tol = 1e-9 * A
    inf = np.inf
    dl = np.where(b[:, 0] > tol, points[:, 0] - b[:, 0], inf)
    db = np.where(b[:, 1] > tol, points[:, 1] - b[:, 1], inf)
    dr = np.where(b[:, 2] < A - tol, b[:, 2] - points[:, 0], inf)
    dt = np.where(b[:, 3] < A - tol, b[:, 3] - points[:, 1], inf)
    return np.minimum(np.minimum(dl, dr), np.minimum(db, dt))


def _round_robin_order(topology: NetworkTopology) -> np.ndarray:
    """Users sorted by (rank within their cell, BS, index).

    Walking this list visits one user of every cell before returning to a
    cell, so a slot's scheduled users sit in distinct cells whenever possible.
    """
    if "rr_order" not in topology._cache:
        assoc = topology.association
        idx = np.arange(len(assoc))
        by_bs = np.lexsort((idx, assoc))
        rank = np.empty(len(assoc), dtype=int)
        start = np.searchsorted(assoc[by_bs], assoc[by_bs])
        rank[by_bs] = np.arange(len(assoc)) - start
        topology._cache["rr_order"] = np.lexsort((idx, assoc, rank))
    return topology._cache["rr_order"]


def schedule_users(plan: ClusterPlan, topology: NetworkTopology, eligible, slot_index: int,
                   guard_band: bool = False) -> list:
    """Round-robin choice of ``min(|eligible|, |BSs|)`` users in every cluster.

    ``eligible`` is a boolean mask over users (requests for fully cached
    files). The round-robin list interleaves cells (see
    :func:`_round_robin_order`). Returns one index array per cluster.
    """
    eligible = np.asarray(eligible, dtype=bool)
    ucl = plan.cluster_of_bs[topology.association]
    order = _round_robin_order(topology)
    if guard_band:
        d = distance_to_cluster_edge(plan, topology.user_positions, ucl)
        eligible = eligible & (d >= plan.guard_distance)
    out = []
    for j, mem in enumerate(plan.members):
        G = order[(eligible & (ucl == j))[order]]
        if len(G) == 0:
            out.append(G)
            continue
        ks = min(len(G), len(mem))
        start = (slot_index * ks) % len(G)
        out.append(G[(start + np.arange(ks)) % len(G)])
    return out


# ------------------------------------------------------------------ cluster rates

def cluster_rate_logdet(H_c, cov, power, bandwidth: float = 1.0) -> float:
    """Sum capacity of the dual uplink, ``W_c log2 det(I + P' cov^-1 H_c H_c^H)``.

    ``H_c`` is ``(n_bs, n_users)`` (receive antennas by users), ``cov`` the
    ``(n_bs, n_bs)`` interference-plus-noise covariance and ``power`` the
    per-user transmit power.
    """
    H = np.atleast_2d(np.asarray(H_c, dtype=complex))
    C = np.atleast_2d(np.asarray(cov, dtype=complex))
    if power == 0 or H.size == 0:
        return 0.0
    try:
        Ci = np.linalg.inv(C)
    except np.linalg.LinAlgError as exc:
        raise ValueError("interference-plus-noise covariance is singular") from exc
    eig = np.linalg.eigvalsh(C)
    if eig.min() <= 0:
        raise ValueError("interference-plus-noise covariance is not positive definite")
    M = np.eye(H.shape[0]) + power * Ci @ H @ H.conj().T
    sign, logdet = np.linalg.slogdet(M)
    return float(bandwidth * logdet / math.log(2.0))


def zf_gains(H) -> np.ndarray:
    """Effective power gain ``|h_k w_k|^2`` of unit-norm zero-forcing beams.

    ``H`` is ``(n_users, n_bs)`` with ``n_users <= n_bs``.
    """
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    if H.shape[0] > H.shape[1]:
        raise ValueError("zero forcing needs no more users than BSs")
    V = np.linalg.pinv(H)
    return 1.0 / np.sum(np.abs(V) ** 2, axis=0)


def zf_beams(H) -> np.ndarray:
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    V = np.linalg.pinv(H)
    return V / np.linalg.norm(V, axis=0, keepdims=True)


def zf_precoding_rate(H, total_power: float, noise, bandwidth: float = 1.0) -> np.ndarray:
    """Per-user rates of zero forcing with equal power ``total_power / n_users``.

    ``noise`` (scalar or per user) is the noise-plus-residual-interference
    power over ``bandwidth``.
    """
    g = zf_gains(H)
    p = total_power / len(g)
    return bandwidth * np.log2(1.0 + p * g / np.asarray(noise, dtype=float))


@dataclass(frozen=True)
class ComimoRateBounds:
    G_C: float
    rho: float
    R_c_upper: float
    R_c_lower: float
    correction_exponent: float


def comimo_rate_bounds(params: ChannelParams, d_0: float, r_0: float, N_c=None) -> ComimoRateBounds:
    """Per-Hz bounds on the average Co-MIMO rate of a user of the regular grid."""
    a = params.alpha
    G_C = lattice_interference_sum(d_0 / r_0, 1.0, a, r_0) + d_0 ** (-a)
    rho = 0.5 * (1.0 - d_0 ** (-a) / G_C) ** 2
    snr = params.P * params.G_d / (params.W * params.eta0)
    upper = 0.25 * math.log2(1.0 + 9.0 * snr * G_C)
    lower = rho / 4.0 * math.log2(1.0 + snr * d_0 ** (-a))
    return ComimoRateBounds(G_C, rho, upper, lower, (a - 2.0) / (2.0 * (a - 1.0)))


# ------------------------------------------------------------------ Monte Carlo

@dataclass
class ComimoSamples:
    """Per-slot zero-forcing gains normalised to unit per-BS power.

    For scheduled user ``users[i]`` in slot ``slots[i]``, the SINR at per-BS
    Co-MIMO power density ``rho`` (W/Hz) is
    ``rho * signal[i] / (eta0 + rho * interference[i])``.
    """

    users: np.ndarray
    slots: np.ndarray
    clusters: np.ndarray
    signal: np.ndarray
    interference: np.ndarray
    cluster_records: list      # (slot, cluster, n_bs, n_sched)
    n_slots: int
    n_users: int
    sum_power_ratio: float     # network Co-MIMO power / (N * per-BS budget)

    def mean_user_rate(self, rho: float, eta0: float) -> float:
        """Average over all users (idle slots count as zero) of log2(1 + SINR) per Hz."""
        if len(self.users) == 0:
            return 0.0
        r = np.log2(1.0 + rho * self.signal / (eta0 + rho * self.interference))
        return float(np.sum(r) / (self.n_slots * self.n_users))

    def per_user_rate(self, rho: float, eta0: float) -> np.ndarray:
        r = np.log2(1.0 + rho * self.signal / (eta0 + rho * self.interference))
        return np.bincount(self.users, weights=r, minlength=self.n_users) / self.n_slots

    def cluster_rates(self, rho: float, eta0: float, bandwidth: float) -> list:
        r = bandwidth * np.log2(1.0 + rho * self.signal / (eta0 + rho * self.interference))
        tot = {}
        for s, c, v in zip(self.slots, self.clusters, r):
            tot[(int(s), int(c))] = tot.get((int(s), int(c)), 0.0) + float(v)
        return [(s, c, nb, ns, tot.get((s, c), 0.0)) for s, c, nb, ns in self.cluster_records]


def sample_comimo(topology: NetworkTopology, params: ChannelParams, N_c: int, eligible,
                  n_slots: int, seed: int, guard_band: bool = False,
                  guard_constant: float = GUARD_CONSTANT) -> ComimoSamples:
    """Random cluster offsets and phases, round-robin scheduling and ZF beams."""
    draw = PhaseDraw(seed)
    eligible = np.asarray(eligible, dtype=bool)
    gains = params.G_d * topology.user_bs_distances() ** (-params.alpha)
    amp = np.sqrt(gains)
    side = math.sqrt(N_c) * topology.cell_pitch
    users, slots, clus, sig, intf, recs = [], [], [], [], [], []
    total_power = 0.0
    for t in range(n_slots):
        off = draw.generator(t, stream=1).uniform(0.0, side, size=2)
        plan = form_clusters(topology, N_c, off, params.alpha, guard_constant)
        sched = schedule_users(plan, topology, eligible, t, guard_band)
        active = [j for j, s in enumerate(sched) if len(s)]
        for j, s in enumerate(sched):
            recs.append((t, j, len(plan.members[j]), len(s)))
        if not active:
            continue
        all_users = np.concatenate([sched[j] for j in active])
        theta = draw.phases(t, (topology.n_users, topology.n_bs), stream=0)[all_users]
        H = amp[all_users] * np.exp(1j * theta)
        rx = np.zeros(len(all_users))
        own = np.zeros(len(all_users))
        intra = np.zeros(len(all_users))
        row = 0
        for j in active:
            s, mem = sched[j], plan.members[j]
            blk = slice(row, row + len(s))
            Wj = zf_beams(H[blk][:, mem])
            pj = len(mem) / len(s)                  # per-user power at unit per-BS power
            total_power += len(mem)
            recv = pj * np.abs(H[:, mem] @ Wj) ** 2
            rx += recv.sum(axis=1)
            own[blk] = np.diag(recv[blk])
            # residual intra-cluster leakage is zero up to rounding
            intra[blk] = recv[blk].sum(axis=1)
            row += len(s)
        users.append(all_users)
        slots.append(np.full(len(all_users), t))
        clus.append(np.concatenate([np.full(len(sched[j]), j) for j in active]))
        sig.append(own)
        intf.append(np.maximum(rx - intra, 0.0))
    cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt))
    ratio = total_power / (n_slots * topology.n_bs) if n_slots else 0.0
    return ComimoSamples(cat(users, int), cat(slots, int), cat(clus, int), cat(sig, float),
                         cat(intf, float), recs, n_slots, topology.n_users, ratio)


CLUSTER_CSV_HEADER = "slot,cluster,n_bs,n_sched,rate_bps"
