import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdwn.analysis import (ANALYSIS_CSV_HEADER, BandSplit, SplitOptimizerMismatch, ThroughputTerms,
                           _min_terms, analysis_row, comimo_corner_rates, cooperation_gain,
                           gain_high_snr, gain_order_check, high_snr_rates, maximize_split,
                           per_bs_throughput_A, per_bs_throughput_A_highSNR, per_bs_throughput_B,
                           per_bs_throughput_B_highSNR, phi, psi, rates_regular,
                           single_user_traffic, taqgen, throughput_terms, w_prime)
from cdwn.caching import comimo_threshold, optimal_replication, zipf
from cdwn.channel import ChannelParams, lattice_interference_sum
from cdwn.multihop import build_load_model, measure_relay_load
from cdwn.topology import generate_regular

D0, R0 = 25.0, 100.0


@pytest.fixture(scope="module")
def p20():
    return ChannelParams.from_snr(20, D0)


def test_phi_values():
    assert phi(0.12) == 2
    assert phi(1.0) == 0
    assert phi(0.5) == 1
    assert list(phi(np.array([1.0, 0.5, 0.12]))) == [0, 1, 2]
    with pytest.raises(ValueError):
        phi(0.0)


def test_psi_values():
    assert psi(1.0) == 0.0
    assert psi(0.12) == pytest.approx(1.28, abs=1e-14)
    assert psi(0.5) == pytest.approx(0.5, abs=1e-14)


def test_psi_equals_ring_sum():
    q = np.linspace(1e-3, 1.0, 200)
    err = [abs(psi(x) - single_user_traffic(x, 1.0)) for x in q]
    assert max(err) < 1e-12
    assert single_user_traffic(0.12, 3.0) == pytest.approx(3 * 1.28)


@pytest.mark.parametrize("q", [0.9, 0.5, 0.3, 0.2, 0.12, 0.1, 0.08, 0.05, 0.03, 0.02])
def test_psi_matches_routed_traffic(q):
    # relayed segment fractions times hop counts for one request in the grid centre
    t = generate_regular(20, R0, D0)
    m = build_load_model(t, [q])
    w = np.zeros((1, t.n_bs))
    w[0, 210] = 1.0
    _, loads = measure_relay_load(m, w)
    assert loads.sum() == pytest.approx(psi(q), abs=1e-12)


def test_psi_vs_routed_traffic_square_ring():
    # for q = 0.04 the 25 nearest BSs form a 5 x 5 square, not the hop diamond
    t = generate_regular(20, R0, D0)
    m = build_load_model(t, [0.04])
    w = np.zeros((1, t.n_bs))
    w[0, 210] = 1.0
    assert measure_relay_load(m, w)[1].sum() > psi(0.04)


def test_w_prime_forms():
    W = 1.0
    for wb, wc in [(0.3, 0.1), (1.0, 0.0), (0.0, 0.0), (0.2, 0.8)]:
        assert w_prime(W, wb, wc) == pytest.approx((9 * W - 5 * wb + 27 * wc) / 36)
    assert BandSplit.from_total(W, 1.0, 0.0).W_prime == pytest.approx(W / 9)


def test_split_powers_sum():
    s = BandSplit.from_total(1e6, 3e5, 2e5)
    assert sum(s.powers(2.5)) == pytest.approx(2.5)
    with pytest.raises(ValueError):
        BandSplit.from_total(1.0, 0.7, 0.5)


def test_rates_vanish_without_power():
    r = rates_regular(BandSplit(0.2, 0.5, 0.3), ChannelParams(P=0.0), D0, R0)
    assert r.R_b == 0 and r.R_d == 0


@pytest.mark.parametrize("snr", [0.0, 20.0, 40.0])
def test_rates_within_corners(snr):
    p = ChannelParams.from_snr(snr, D0)
    g = np.linspace(0, p.W, 45)
    n = 0
    for wb in g:
        for wc in g:
            if wb + wc > p.W:
                continue
            r = rates_regular(BandSplit.from_total(p.W, wb, wc), p, D0, R0)
            assert r.R_b_L * (1 - 1e-12) <= r.R_b <= r.R_b_U * (1 + 1e-12)
            assert r.R_d_L * (1 - 1e-12) <= r.R_d <= r.R_d_U * (1 + 1e-12)
            n += 1
    assert n > 1000


def test_high_snr_rates_values():
    p = ChannelParams()
    Rb, Rd = high_snr_rates(p, D0, R0)
    assert Rb == pytest.approx(math.log2(1 + 1 / lattice_interference_sum(1, 3, 3.5)))
    assert Rd == pytest.approx(math.log2(1 + 0.25 ** -3.5 / lattice_interference_sum(0.25, 2, 3.5)))


def test_all_comimo_mass(p20):
    prof = zipf(4, 1.0)
    q = np.ones(4)
    t = throughput_terms(q, prof)
    assert t.Q_d == 0 and t.Q_b == 0 and t.Q_c == pytest.approx(1.0)
    RcU, _ = comimo_corner_rates(p20, D0, R0)
    assert per_bs_throughput_A(q, prof, p20, "U", D0, R0) == pytest.approx(4 * p20.W * RcU / t.Q_c)


def test_no_comimo_mass_two_band(p20):
    prof = zipf(10, 1.0)
    q = optimal_replication(prof, 1.5)
    t = throughput_terms(q, prof)
    assert t.Q_c == 0
    r = rates_regular(BandSplit(0, p20.W, 0), p20, D0, R0)
    want = 4 * p20.W * r.R_b_U * r.R_d_U / (t.Q_b * r.R_d_U + t.Q_d * r.R_b_U)
    assert per_bs_throughput_A(q, prof, p20, "U", D0, R0) == pytest.approx(want, rel=1e-12)


def test_closed_form_vs_grid_search_random():
    rng = np.random.default_rng(12)
    for _ in range(50):
        L = int(rng.integers(2, 40))
        prof = zipf(L, rng.uniform(0, 3))
        q = optimal_replication(prof, rng.uniform(0.05, 0.95) * L)
        p = ChannelParams.from_snr(rng.uniform(-5, 45), D0)
        side = "U" if rng.random() < 0.5 else "L"
        # raises SplitOptimizerMismatch beyond 0.5 %
        per_bs_throughput_A(q, prof, p, side, D0, R0)


def test_mismatch_is_reported():
    with pytest.raises(SplitOptimizerMismatch):
        per_bs_throughput_A(np.array([0.5, 0.3]), zipf(2, 1.0), ChannelParams.from_snr(20, D0),
                            "U", D0, R0, tol=-1.0)


def test_maximize_split_known_optimum():
    val, wb, wc = maximize_split(lambda b, c: -(b - 0.31) ** 2 - (c - 0.47) ** 2, 1.0)
    assert (wb, wc) == pytest.approx((0.31, 0.47), abs=1e-6)
    assert val == pytest.approx(0.0, abs=1e-10)
    # ties prefer the larger downlink share
    _, wb, wc = maximize_split(lambda b, c: np.zeros_like(b), 1.0)
    assert (wb, wc) == (0.0, 0.0)


def test_taqgen_equals_min_of_three():
    terms = ThroughputTerms(0.7, 0.3, 0.7)
    Rb, Rc, Rd = 0.05, 0.9, 0.4
    val, wb, wc = maximize_split(lambda b, c: 4 * _min_terms(1.0, b, c, Rb, Rd, Rc, terms), 1.0)
    assert val == pytest.approx(taqgen(Rb, Rc, Rd, 1.0, terms), rel=1e-9)
    # at the optimum every band is fully used
    assert wb * Rb / 0.7 == pytest.approx(wc * Rc / 0.3, rel=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.01, 1.0), st.floats(0.01, 10.0), st.floats(0.01, 10.0))
def test_high_snr_is_substitution_limit(Q_b, Q_d, Rt_b, Rt_d):
    terms = ThroughputTerms(Q_b, 1 - Q_d, Q_d)
    # R_b -> R~b/36, R_d -> R~d/16, R_c -> infinity
    lim = taqgen(Rt_b / 36, 1e300, Rt_d / 16, 1.0, terms)
    closed = Rt_b * Rt_d / (4 * Q_d * Rt_b + 9 * Q_b * Rt_d)
    assert lim == pytest.approx(closed, rel=1e-12)


def test_high_snr_undefined_when_all_cached():
    assert per_bs_throughput_A_highSNR(np.ones(3), zipf(3, 1.0), 1.0, 1.0) == math.inf


def test_scheme_b_all_comimo_mode():
    Rt_b, Rt_d = 0.3, 2.0
    assert per_bs_throughput_B_highSNR(np.ones(3), zipf(3, 1.0), Rt_b, Rt_d, 5.0) == pytest.approx(5 * Rt_d / 4)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 60), st.floats(0.0, 3.0), st.floats(0.02, 0.98))
def test_gain_identity(L, tau, frac):
    prof = zipf(L, tau)
    q = optimal_replication(prof, frac * L)
    Rt_b, Rt_d = high_snr_rates(ChannelParams(), D0, R0)
    a = per_bs_throughput_A_highSNR(q, prof, Rt_b, Rt_d)
    b = per_bs_throughput_B_highSNR(q, prof, Rt_b, Rt_d)
    g = gain_high_snr(throughput_terms(q, prof), Rt_b, Rt_d)
    assert a >= b * (1 - 1e-12)
    assert g == pytest.approx(a - b, rel=1e-12, abs=1e-12 * a)


def test_gain_zero_below_threshold(p20):
    prof = zipf(10, 1.0)
    thr = comimo_threshold(1.0, 10)
    g = cooperation_gain(optimal_replication(prof, 0.99 * thr), prof, p20, D0, R0)
    assert g.high_snr == 0.0 and g.lower == 0.0 and g.upper == 0.0
    g = cooperation_gain(optimal_replication(prof, 1.2 * thr), prof, p20, D0, R0)
    assert g.high_snr > 0 and g.upper > 0


def test_gain_larger_for_skewed_popularity():
    Rt_b, Rt_d = high_snr_rates(ChannelParams(), D0, R0)
    for b in np.linspace(1.0, 9.0, 17):
        g = []
        for tau in (1.0, 2.0):
            prof = zipf(10, tau)
            g.append(gain_high_snr(throughput_terms(optimal_replication(prof, b), prof), Rt_b, Rt_d))
        assert g[1] >= g[0]


def test_gain_order_check():
    a = gain_order_check(2.0, 100, 5.0)
    b = gain_order_check(2.0, 10_000, 5.0)
    assert a.inner > 0 and 0.5 < a.inner / b.inner < 2
    assert a.threshold == comimo_threshold(2.0, 100)
    # flat popularity: the inner quantity is budget * Q_c, zero until every file is full
    f = gain_order_check(0.0, 50, 10.0)
    assert f.inner == 0 and not f.clears_threshold and f.threshold == pytest.approx(50)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 30), st.floats(0.2, 2.5), st.floats(0.05, 0.6), st.integers(1, 29),
       st.floats(1.05, 3.0))
def test_more_caching_never_hurts_upper(L, tau, frac, idx, factor):
    prof = zipf(L, tau)
    p = ChannelParams.from_snr(20, D0)
    q = optimal_replication(prof, frac * min(L - 1, comimo_threshold(tau, L))).q.copy()
    i = idx % L
    q2 = q.copy()
    q2[i] = min(1.0, q[i] * factor)
    for side in ("U", "L"):
        if side == "L" and q2[i] >= 1:
            continue
        a = per_bs_throughput_A(q, prof, p, side, D0, R0, cross_check=False)
        b = per_bs_throughput_A(q2, prof, p, side, D0, R0, cross_check=False)
        assert b >= a * (1 - 1e-12)


def test_lower_corner_drops_when_file_becomes_full():
    # the lower Co-MIMO corner rate is far below the downlink rate, so moving a file
    # into the fully cached set lowers the lower bound
    prof = zipf(5, 1.0)
    p = ChannelParams.from_snr(20, D0)
    q = np.array([0.99, 0.5, 0.4, 0.3, 0.2])
    q2 = q.copy()
    q2[0] = 1.0
    a = per_bs_throughput_A(q, prof, p, "L", D0, R0, cross_check=False)
    assert per_bs_throughput_A(q2, prof, p, "L", D0, R0, cross_check=False) < a


def test_scheme_b_bounds(p20):
    prof = zipf(10, 1.0)
    q = optimal_replication(prof, 6.0)
    lo = per_bs_throughput_B(q, prof, p20, "L", D0, R0)
    hi = per_bs_throughput_B(q, prof, p20, "U", D0, R0)
    assert 0 < lo < hi
    assert per_bs_throughput_A(q, prof, p20, "U", D0, R0) >= hi


def test_analysis_row(p20):
    row = analysis_row(6.0, 1.0, 10, p20, D0, R0)
    assert list(row) == ANALYSIS_CSV_HEADER.split(",")
    assert row["dGamma_inf"] == pytest.approx(row["GammaA_inf"] - row["GammaB_inf"], rel=1e-12)
    assert row["Qc"] + row["Qd"] == pytest.approx(1.0)
