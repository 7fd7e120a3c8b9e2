"""Closed-form per-BS throughput of the cached regular network.

All per-Hz rates use log base 2, so throughputs come out in bit/s.
``scheme A`` combines cache-assisted multihop with cache-induced Co-MIMO;
``scheme B`` delivers every file through multihop and the downlink only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .caching import (PopularityProfile, ReplicationVector, comimo_threshold, is_full,
                      optimal_replication, zipf)
from .channel import ChannelParams, lattice_interference_sum

M_B, M_D = 9, 4     # inter-BS and downlink subband counts of the regular grid


# ------------------------------------------------------------------ hop counts

def phi(q):
    """Largest hop count from a BS to its source BSs on the regular grid."""
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0):
        raise ValueError("q must be positive")
    out = np.ceil((-1.0 + np.sqrt(2.0 / q - 1.0)) / 2.0 - 1e-12).astype(int)
    out = np.maximum(out, 0)
    return int(out) if out.ndim == 0 else out


def psi(q):
    """Mean inter-BS traffic per unit user rate for a file with replication ``q``."""
    f = np.asarray(phi(q), dtype=float)
    q = np.asarray(q, dtype=float)
    out = f * (1.0 - q) - (2.0 / 3.0) * (f ** 3 - f) * q
    return float(out) if out.ndim == 0 else out


def single_user_traffic(q: float, R: float = 1.0) -> float:
    """Inter-BS traffic of one user, summed ring by ring.

    The ``4m`` BSs at ``m`` hops each send ``q R`` over ``m`` hops for
    ``m < phi``; the outermost ring sends the remainder over ``phi`` hops.
    """
    f = phi(q)
    inner = sum(4 * m * m * q for m in range(1, f))
    return R * (inner + f * (1.0 - (1.0 + 2.0 * f * f - 2.0 * f) * q))


@dataclass(frozen=True)
class ThroughputTerms:
    Q_b: float
    Q_c: float
    Q_d: float


def throughput_terms(q, profile: PopularityProfile) -> ThroughputTerms:
    qv = np.asarray(q.q if isinstance(q, ReplicationVector) else q, dtype=float)
    p = profile.p
    full = is_full(qv)
    Q_c = float(np.sum(p[full]))
    Q_d = float(np.sum(p[~full]))
    Q_b = float(np.sum(p[~full] * psi(qv[~full]))) if np.any(~full) else 0.0
    return ThroughputTerms(Q_b, Q_c, Q_d)


# ------------------------------------------------------------------ band split

@dataclass(frozen=True)
class BandSplit:
    """Partition of the band into inter-BS, downlink and Co-MIMO parts.

    Every BS spends power in proportion to bandwidth actually used:
    ``W_b / M_b``, ``W_d / M_d`` and ``W_c``, which sum to ``W'``.
    """

    W_b: float
    W_d: float
    W_c: float
    M_b: int = M_B
    M_d: int = M_D

    def __post_init__(self):
        if min(self.W_b, self.W_d, self.W_c) < 0:
            raise ValueError("bandwidths must be nonnegative")

    @classmethod
    def from_total(cls, W, W_b, W_c, M_b=M_B, M_d=M_D):
        W_d = W - W_b - W_c
        if W_d < -1e-9 * W:
            raise ValueError("W_b + W_c exceeds W")
        return cls(W_b, max(W_d, 0.0), W_c, M_b, M_d)

    @property
    def W(self) -> float:
        return self.W_b + self.W_d + self.W_c

    @property
    def W_prime(self) -> float:
        return self.W_b / self.M_b + self.W_d / self.M_d + self.W_c

    def powers(self, P: float):
        """Per-subband powers ``(P_b, P_d, P_c)``; they add up to ``P`` per BS."""
        wp = self.W_prime
        return (self.W_b * P / (self.M_b * wp), self.W_d * P / (self.M_d * wp), self.W_c * P / wp)


def w_prime(W, W_b, W_c, M_b=M_B, M_d=M_D):
    return W_b / M_b + (W - W_b - W_c) / M_d + W_c


# ------------------------------------------------------------------ rates

@dataclass(frozen=True)
class RegularRates:
    R_b: float
    R_d: float
    R_b_U: float
    R_b_L: float
    R_d_U: float
    R_d_L: float


def _interference_terms(params: ChannelParams, d_0, r_0):
    a = params.alpha
    I_b = lattice_interference_sum(1.0, 3.0, a, r_0)
    I_d = lattice_interference_sum(d_0 / r_0, 2.0, a, r_0)
    return params.G_b * r_0 ** (-a), params.G_b * I_b, params.G_d * d_0 ** (-a), params.G_d * I_d


def _rate(share, P, sig, wn, interf):
    return share * np.log2(1.0 + P * sig / (wn + P * interf))


def rates_regular(split: BandSplit, params: ChannelParams, d_0: float, r_0: float) -> RegularRates:
    """Per-Hz inter-BS and downlink rates of the regular grid and their corners."""
    sb, ib, sd, idd = _interference_terms(params, d_0, r_0)
    P, W, eta = params.P, params.W, params.eta0
    wp = split.W_prime
    return RegularRates(
        R_b=float(_rate(1 / 36, P, sb, wp * eta, ib)),
        R_d=float(_rate(1 / 16, P, sd, wp * eta, idd)),
        R_b_U=float(_rate(1 / 36, 9 * P, sb, W * eta, ib)),
        R_b_L=float(_rate(1 / 36, P, sb, W * eta, ib)),
        R_d_U=float(_rate(1 / 16, 9 * P, sd, W * eta, idd)),
        R_d_L=float(_rate(1 / 16, P, sd, W * eta, idd)),
    )


def high_snr_rates(params: ChannelParams, d_0: float, r_0: float):
    """Interference-limited per-Hz rates ``(R~_b, R~_d)``."""
    a = params.alpha
    Rb = math.log2(1.0 + r_0 ** (-a) / lattice_interference_sum(1.0, 3.0, a, r_0))
    Rd = math.log2(1.0 + d_0 ** (-a) / lattice_interference_sum(d_0 / r_0, 2.0, a, r_0))
    return Rb, Rd


def comimo_corner_rates(params: ChannelParams, d_0: float, r_0: float):
    """``(R_c^U, R_c^L)`` per Hz; see :func:`cdwn.comimo.comimo_rate_bounds`."""
    from .comimo import comimo_rate_bounds
    b = comimo_rate_bounds(params, d_0, r_0)
    return b.R_c_upper, b.R_c_lower


# ------------------------------------------------------------------ optimiser

class SplitOptimizerMismatch(RuntimeError):
    pass


def maximize_split(objective, W: float, coarse: int = 100, levels: int = 8, refine: int = 21):
    """Deterministic nested grid search of ``objective(W_b, W_c)`` over the simplex.

    ``objective`` must accept equally shaped arrays. Returns
    ``(value, W_b, W_c)``; ties go to the larger ``W_d = W - W_b - W_c``,
    then to the lexicographically smaller ``(W_b, W_c)``.
    """
    def best(wb, wc):
        wb, wc = np.meshgrid(wb, wc, indexing="ij")
        wb, wc = wb.ravel(), wc.ravel()
        ok = wb + wc <= W * (1 + 1e-12)
        wb, wc = wb[ok], wc[ok]
        val = np.asarray(objective(wb, wc), dtype=float)
        val = np.where(np.isfinite(val), val, -np.inf)
        top = val.max()
        cand = np.flatnonzero(val >= top - 1e-12 * abs(top))
        wd = W - wb[cand] - wc[cand]
        order = np.lexsort((wc[cand], wb[cand], -wd))
        i = cand[order[0]]
        return top, wb[i], wc[i]

    step = W / coarse
    grid = np.linspace(0.0, W, coarse + 1)
    val, wb, wc = best(grid, grid)
    for _ in range(levels):
        # re-centre the window while the best point sits on its edge
        for _ in range(200):
            lo_b, lo_c = max(0.0, wb - step), max(0.0, wc - step)
            hi_b, hi_c = min(W, wb + step), min(W, wc + step)
            v, b, c = best(np.linspace(lo_b, hi_b, refine), np.linspace(lo_c, hi_c, refine))
            if not v > val:
                break
            val, wb, wc = v, b, c
            edge = (b in (lo_b, hi_b) and 0.0 < b < W) or (c in (lo_c, hi_c) and 0.0 < c < W)
            if not edge:
                break
        step = step * 2 / (refine - 1)
    return float(val), float(wb), float(wc)


def _min_terms(W, wb, wc, Rb, Rd, Rc, terms: ThroughputTerms):
    wd = W - wb - wc
    out = np.full(np.shape(wb), np.inf)
    for w, r, Q in ((wb, Rb, terms.Q_b), (wd, Rd, terms.Q_d), (wc, Rc, terms.Q_c)):
        if Q > 0:
            out = np.minimum(out, w * r / Q)
    return out


def taqgen(Rb, Rc, Rd, W, terms: ThroughputTerms) -> float:
    """``4 Rb Rc Rd W / (Q_b Rc Rd + Q_c Rb Rd + Q_d Rb Rc)``."""
    den = terms.Q_b * Rc * Rd + terms.Q_c * Rb * Rd + terms.Q_d * Rb * Rc
    if den == 0:
        return math.inf
    return 4.0 * Rb * Rc * Rd * W / den


def per_bs_throughput_A(q, profile: PopularityProfile, params: ChannelParams, bound_side: str,
                        d_0: float, r_0: float, cross_check: bool = True, tol: float = 5e-3) -> float:
    """Scheme A per-BS throughput bound (``bound_side`` ``"L"`` or ``"U"``).

    The closed form is confirmed by maximising ``4 min(W_b R_b/Q_b, W_d R_d/Q_d,
    W_c R_c/Q_c)`` over the band simplex; a disagreement above ``tol`` raises
    :class:`SplitOptimizerMismatch`.
    """
    if bound_side not in ("L", "U"):
        raise ValueError("bound_side must be 'L' or 'U'")
    terms = throughput_terms(q, profile)
    rr = rates_regular(BandSplit(0.0, params.W, 0.0), params, d_0, r_0)
    Rc_U, Rc_L = comimo_corner_rates(params, d_0, r_0)
    Rb, Rd, Rc = ((rr.R_b_U, rr.R_d_U, Rc_U) if bound_side == "U" else (rr.R_b_L, rr.R_d_L, Rc_L))
    closed = taqgen(Rb, Rc, Rd, params.W, terms)
    if cross_check and math.isfinite(closed):
        val, _, _ = maximize_split(lambda wb, wc: 4.0 * _min_terms(params.W, wb, wc, Rb, Rd, Rc, terms),
                                   params.W)
        if abs(val - closed) > tol * closed:
            raise SplitOptimizerMismatch(f"closed form {closed:.6g} vs grid search {val:.6g}")
    return closed


def per_bs_throughput_B(q, profile: PopularityProfile, params: ChannelParams, bound_side: str,
                        d_0: float, r_0: float) -> float:
    """Scheme B with corner rates: ``4 W R_b R_d / (Q_b R_d + R_b)``."""
    terms = throughput_terms(q, profile)
    rr = rates_regular(BandSplit(0.0, params.W, 0.0), params, d_0, r_0)
    Rb, Rd = (rr.R_b_U, rr.R_d_U) if bound_side == "U" else (rr.R_b_L, rr.R_d_L)
    return 4.0 * params.W * Rb * Rd / (terms.Q_b * Rd + Rb)


def per_bs_throughput_A_highSNR(q, profile: PopularityProfile, Rt_b: float, Rt_d: float,
                                W: float = 1.0) -> float:
    """``W R~b R~d / (4 Q_d R~b + 9 Q_b R~d)``; ``inf`` when every file is fully cached."""
    t = throughput_terms(q, profile)
    den = 4.0 * t.Q_d * Rt_b + 9.0 * t.Q_b * Rt_d
    if den == 0:
        return math.inf
    return W * Rt_b * Rt_d / den


def per_bs_throughput_B_highSNR(q, profile: PopularityProfile, Rt_b: float, Rt_d: float,
                                W: float = 1.0) -> float:
    """``W R~b R~d / (4 R~b + 9 Q_b R~d)``."""
    t = throughput_terms(q, profile)
    return W * Rt_b * Rt_d / (4.0 * Rt_b + 9.0 * t.Q_b * Rt_d)


def gain_high_snr(terms: ThroughputTerms, Rt_b: float, Rt_d: float, W: float = 1.0) -> float:
    """Interference-limited cooperation gain; exactly zero without fully cached files."""
    if terms.Q_c == 0:
        return 0.0
    dA = 4.0 * terms.Q_d * Rt_b + 9.0 * terms.Q_b * Rt_d
    dB = 4.0 * Rt_b + 9.0 * terms.Q_b * Rt_d
    if dA == 0:
        return math.inf
    return 4.0 * W * Rt_b * Rt_d * terms.Q_c * Rt_b / (dA * dB)


@dataclass(frozen=True)
class CooperationGain:
    lower: float
    upper: float
    high_snr: float


def cooperation_gain(q_star, profile: PopularityProfile, params: ChannelParams,
                     d_0: float, r_0: float) -> CooperationGain:
    """Bounds on, and the high-SNR limit of, the Scheme A minus Scheme B gain."""
    terms = throughput_terms(q_star, profile)
    lo = (per_bs_throughput_A(q_star, profile, params, "L", d_0, r_0)
          - per_bs_throughput_B(q_star, profile, params, "L", d_0, r_0))
    hi = (per_bs_throughput_A(q_star, profile, params, "U", d_0, r_0)
          - per_bs_throughput_B(q_star, profile, params, "U", d_0, r_0))
    if terms.Q_c == 0:
        lo = hi = 0.0
    Rt_b, Rt_d = high_snr_rates(params, d_0, r_0)
    return CooperationGain(lo, hi, gain_high_snr(terms, Rt_b, Rt_d, params.W))


@dataclass(frozen=True)
class GainOrder:
    inner: float
    threshold: float
    clears_threshold: bool
    Q_c: float
    sum_p23: float


def gain_order_check(tau: float, L: int, B_C_over_F: float) -> GainOrder:
    """``budget * Q_c / (sum_l p_l^(2/3))^3`` and the cooperation threshold."""
    prof = zipf(L, tau)
    q = optimal_replication(prof, B_C_over_F)
    terms = throughput_terms(q, prof)
    s = float(np.sum((prof.p ** (2.0 / 3.0))[::-1]))
    thr = comimo_threshold(tau, L)
    return GainOrder(B_C_over_F * terms.Q_c / s ** 3, thr, terms.Q_c > 0, terms.Q_c, s)


ANALYSIS_CSV_HEADER = "BtildeC,tau,Qb,Qc,Qd,GammaA_L,GammaA_U,GammaA_inf,GammaB_inf,dGamma_inf"


def analysis_row(budget: float, tau: float, L: int, params: ChannelParams, d_0: float,
                 r_0: float) -> dict:
    """One sweep point of closed-form quantities under the order-optimal replication."""
    prof = zipf(L, tau)
    q = optimal_replication(prof, budget)
    t = throughput_terms(q, prof)
    Rt_b, Rt_d = high_snr_rates(params, d_0, r_0)
    gA = per_bs_throughput_A_highSNR(q, prof, Rt_b, Rt_d, params.W)
    gB = per_bs_throughput_B_highSNR(q, prof, Rt_b, Rt_d, params.W)
    return {
        "BtildeC": budget, "tau": tau, "Qb": t.Q_b, "Qc": t.Q_c, "Qd": t.Q_d,
        "GammaA_L": per_bs_throughput_A(q, prof, params, "L", d_0, r_0),
        "GammaA_U": per_bs_throughput_A(q, prof, params, "U", d_0, r_0),
        "GammaA_inf": gA, "GammaB_inf": gB,
        "dGamma_inf": gain_high_snr(t, Rt_b, Rt_d, params.W),
    }
