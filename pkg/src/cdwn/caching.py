"""Zipf popularity, replication vectors and the two-mode MDS cache plan.

File indices are 1-based (``1..L``) wherever they appear in public data;
probability and replication arrays are ordinary 0-based numpy vectors with
entry ``l - 1`` belonging to file ``l``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .topology import NetworkTopology

FULL_TOL = 1e-12


@dataclass(frozen=True)
class PopularityProfile:
    L: int
    tau: float
    p: np.ndarray
    Z: float


def zipf(L: int, tau: float) -> PopularityProfile:
    """Zipf popularity ``p_l = l**(-tau) / Z``."""
    if L < 1:
        raise ValueError("need at least one file")
    if tau < 0:
        raise ValueError("skewness must be nonnegative")
    w = np.arange(1, L + 1, dtype=float) ** (-float(tau))
    Z = float(np.sum(w[::-1]))
    return PopularityProfile(int(L), float(tau), w / Z, Z)


@dataclass(frozen=True)
class ReplicationVector:
    """Fraction ``q_l`` of every file cached at each BS.

    ``budget`` is the normalised cache size ``B_C / F``.
    """

    q: np.ndarray
    budget: float
    F: float | None = None
    B_C: float | None = None

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if np.any(q < 0) or np.any(q > 1 + FULL_TOL):
            raise ValueError("replication entries must lie in [0, 1]")
        if q.sum() > self.budget * (1 + 1e-12) + 1e-12:
            raise ValueError("replication vector exceeds the cache budget")
        object.__setattr__(self, "q", np.minimum(q, 1.0))

    @property
    def L(self) -> int:
        return len(self.q)


def comimo_threshold(tau: float, L: int) -> float:
    """``sum_l l**(-2 tau / 3)``: the smallest budget that fully caches file 1."""
    return float(np.sum((np.arange(1, L + 1, dtype=float) ** (-2.0 * tau / 3.0))[::-1]))


def optimal_replication(profile: PopularityProfile, budget: float, F=None) -> ReplicationVector:
    """Order-optimal replication ``q_l = min(budget p_l^(2/3) / sum p^(2/3), 1)``."""
    if not 0 < budget < profile.L:
        raise ValueError("cache budget must satisfy 0 < B_C/F < L")
    w = profile.p ** (2.0 / 3.0)
    q = np.minimum(budget * w / np.sum(w[::-1]), 1.0)
    return ReplicationVector(q, float(budget), F, None if F is None else budget * F)


def uniform_replication(L: int, budget: float, F=None) -> ReplicationVector:
    """Equal share ``q_l = budget / L`` of every file."""
    if not 0 < budget < L:
        raise ValueError("cache budget must satisfy 0 < B_C/F < L")
    return ReplicationVector(np.full(L, budget / L), float(budget), F,
                             None if F is None else budget * F)


def replication_objective(p, q) -> float:
    """``sum_l p_l / sqrt(q_l)``, the quantity the replication minimises."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    if np.any(q <= 0):
        return math.inf
    return float(np.sum(p / np.sqrt(q)))


def is_full(q) -> np.ndarray:
    return np.asarray(q) >= 1.0 - FULL_TOL


# ------------------------------------------------------------------ cache plan

@dataclass(frozen=True)
class CachePlan:
    """Two-mode MDS cache content of every BS.

    Files with ``q_l < 1`` (multihop mode) have one distinct parity block of
    ``floor(q_l * s)`` bits per segment of length ``s`` at every BS; files with
    ``q_l = 1`` (Co-MIMO mode) have the same ``L_S``-bit parity block of each
    segment at all BSs.
    """

    replication: ReplicationVector
    multihop_set: tuple
    comimo_set: tuple
    segment_size: int
    file_size: int
    n_segments: int
    block_bits: dict = field(repr=False)    # file -> per-segment cached bits
    bits_per_bs: int = 0
    n_bs: int = 0

    @property
    def q(self) -> np.ndarray:
        return self.replication.q

    def mode(self, file: int) -> str:
        return "comimo" if file in self.comimo_set else "multihop"

    def parity_block(self, bs: int, file: int, segment: int) -> tuple:
        """``(block id, bits)`` of the parity block BS ``bs`` holds for a segment.

        Multihop-mode blocks are distinct per BS (block id = BS index);
        Co-MIMO-mode blocks are shared (block id 0).
        """
        if not 0 <= segment < self.n_segments:
            raise IndexError("segment out of range")
        bits = self.block_bits[file][segment]
        return (0 if file in self.comimo_set else int(bs)), int(bits)


CACHE_CSV_HEADER = "file,q,mode,p"


def build_cache_plan(q: ReplicationVector, L_S: int, topology: NetworkTopology | None = None,
                     F: int | None = None, B_C: float | None = None) -> CachePlan:
    """Assign the parity blocks of every file to the BS caches."""
    F = F if F is not None else q.F
    B_C = B_C if B_C is not None else q.B_C
    if F is None:
        raise ValueError("file size F is required")
    if B_C is None:
        B_C = q.budget * F
    F, L_S = int(F), int(L_S)
    if L_S <= 0 or F <= 0:
        raise ValueError("file and segment sizes must be positive")
    if np.all(is_full(q.q)):
        raise ValueError("all files fully cached: the budget is outside the model (B_C < L F)")
    if np.any(q.q <= 0):
        raise ValueError("zero replication entries are not supported")
    n_seg = -(-F // L_S)
    seg_len = np.full(n_seg, L_S, dtype=np.int64)
    seg_len[-1] = F - L_S * (n_seg - 1)
    full = is_full(q.q)
    blocks, total = {}, 0
    for idx, ql in enumerate(q.q):
        f = idx + 1
        if full[idx]:
            b = seg_len.copy()
        else:
            b = np.floor(ql * seg_len + 1e-9).astype(np.int64)
        blocks[f] = b
        total += int(b.sum())
    if total > B_C + 1e-6:
        raise ValueError(f"cache plan needs {total} bits per BS, {total - B_C:.0f} bits over B_C")
    files = np.arange(1, q.L + 1)
    return CachePlan(q, tuple(int(f) for f in files[~full]), tuple(int(f) for f in files[full]),
                     L_S, F, n_seg, blocks, total, 0 if topology is None else topology.n_bs)


def cache_plan_csv(plan: CachePlan, profile: PopularityProfile) -> str:
    rows = [CACHE_CSV_HEADER]
    for idx, ql in enumerate(plan.q):
        f = idx + 1
        rows.append(f"{f},{ql:.12g},{plan.mode(f)},{profile.p[idx]:.12g}")
    return "\n".join(rows) + "\n"


# ------------------------------------------------------------------ requests

@dataclass(frozen=True)
class RequestProfile:
    requests: np.ndarray     # requests[k] = file index (1-based) of user k
    seed: int | None = None

    def csv(self) -> str:
        return "user,file\n" + "".join(f"{k},{f}\n" for k, f in enumerate(self.requests))


def draw_requests(profile: PopularityProfile, n_users: int, seed) -> RequestProfile:
    rng = np.random.default_rng(seed)
    req = rng.choice(profile.L, size=n_users, p=profile.p) + 1
    return RequestProfile(req.astype(int), seed)


# ------------------------------------------------------------------ scaling orders

@dataclass(frozen=True)
class OrderExpr:
    """``coef * L**power * (log L)**log_power``."""

    power: float
    log_power: float = 0.0
    coef: float = 1.0

    def __call__(self, L):
        L = np.asarray(L, dtype=float)
        return self.coef * L ** self.power * np.log(L) ** self.log_power

    def __str__(self):
        parts = []
        if self.power:
            parts.append(f"L^{self.power:g}")
        if self.log_power:
            parts.append(f"log(L)^{self.log_power:g}")
        return "Theta(" + ("*".join(parts) or "1") + ")"


@dataclass(frozen=True)
class CacheRegime:
    label: str
    min_cache: OrderExpr
    threshold: float


def _regime_label(tau: float) -> str:
    if abs(tau - 1.0) <= 1e-12:
        return "tau=1"
    if abs(tau - 1.5) <= 1e-12:
        return "tau=3/2"
    if tau < 1:
        return "tau<1"
    if tau < 1.5:
        return "1<tau<3/2"
    return "tau>3/2"


def min_cache_regime(tau: float, L: int) -> CacheRegime:
    """Order of the smallest cache giving linear capacity scaling.

    ``threshold`` is the exact budget below which no file is fully cached
    and hence no cache-induced cooperation is possible.
    """
    if L < 1:
        raise ValueError("need at least one file")
    label = _regime_label(tau)
    expr = {
        "tau<1": OrderExpr(1.0),
        "tau=1": OrderExpr(1.0, -2.0),
        "1<tau<3/2": OrderExpr(3.0 - 2.0 * tau),
        "tau=3/2": OrderExpr(0.0, 3.0),
        "tau>3/2": OrderExpr(0.0),
    }[label]
    return CacheRegime(label, expr, comimo_threshold(tau, L))


def throughput_order(tau: float, L: int, L_tilde: float) -> float:
    """Achievable per-user throughput order for large normalised content size ``L_tilde``."""
    label = _regime_label(tau)
    if label == "tau<1":
        return 1.0 / math.sqrt(L_tilde)
    if label == "tau=1":
        return min(math.log(L) / math.sqrt(L_tilde), 1.0)
    if label == "1<tau<3/2":
        return min(L ** (tau - 1.0) / math.sqrt(L_tilde), 1.0)
    if label == "tau=3/2":
        return min(math.sqrt(L) * math.log(L) ** -1.5 / math.sqrt(L_tilde), 1.0)
    return 1.0


@dataclass(frozen=True)
class ScalingDescriptor:
    value: float
    backhaul_limited_by: str     # "cache" or "wired"
    loading_clipped: bool


def extended_scaling(R_BL_order: float, N0: int, K: int, beta: float = 1.0) -> ScalingDescriptor:
    """Per-user order with general wired count and system loading.

    Wired backhauls contribute ``N0 / K`` on top of the cache-enabled order
    ``R_BL``; with a fraction ``beta`` of users active the order becomes
    ``min(R / beta, 1)``.
    """
    if not 0 < beta <= 1:
        raise ValueError("loading beta must lie in (0, 1]")
    if N0 > K:
        raise ValueError("N0 must not exceed K")
    wired = N0 / K
    base = max(R_BL_order, wired)
    val = base / beta
    return ScalingDescriptor(min(val, 1.0), "wired" if wired > R_BL_order else "cache", val > 1.0)
