import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cdwn.caching import (ReplicationVector, build_cache_plan, cache_plan_csv, comimo_threshold,
                          draw_requests, extended_scaling, is_full, min_cache_regime,
                          optimal_replication, replication_objective, throughput_order,
                          uniform_replication, zipf)
from cdwn.topology import generate_regular


def test_zipf_flat():
    assert np.allclose(zipf(7, 0.0).p, 1 / 7)


def test_zipf_four_files():
    assert zipf(4, 1.0).p[0] == pytest.approx(12 / 25, rel=1e-15)


def test_zipf_normalised_and_sorted():
    p = zipf(50, 1.5).p
    assert abs(p.sum() - 1) < 1e-12
    assert np.all(np.diff(p) <= 0)
    with pytest.raises(ValueError):
        zipf(0, 1.0)
    with pytest.raises(ValueError):
        zipf(3, -0.1)


def test_replication_three_files():
    q = optimal_replication(zipf(3, 1.5), 2.0).q
    # p^(2/3) = 1/l, so q = 2 (1, 1/2, 1/3) / (11/6) capped at one
    assert q == pytest.approx([1.0, 6 / 11, 4 / 11], rel=1e-14)
    assert q.sum() <= 2.0


@pytest.mark.parametrize("L,b", [(5, 2.0), (40, 13.5)])
def test_replication_flat(L, b):
    q = optimal_replication(zipf(L, 0.0), b).q
    assert np.allclose(q, b / L)
    assert np.allclose(uniform_replication(L, b).q, b / L)


@pytest.mark.parametrize("tau", [0.5, 1.0, 2.0])
def test_below_threshold_nothing_full(tau):
    L = 20
    thr = comimo_threshold(tau, L)
    q = optimal_replication(zipf(L, tau), 0.999 * thr).q
    assert np.all(q < 1)
    q = optimal_replication(zipf(L, tau), min(1.001 * thr, L - 0.5)).q
    assert q[0] == 1.0


def test_budget_precondition():
    with pytest.raises(ValueError):
        optimal_replication(zipf(4, 1.0), 4.0)
    with pytest.raises(ValueError):
        optimal_replication(zipf(4, 1.0), 0.0)
    with pytest.raises(ValueError):
        ReplicationVector(np.array([0.9, 0.9]), 1.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 200), st.floats(0.0, 3.0), st.floats(0.01, 0.99))
def test_kkt_interior_ratio(L, tau, frac):
    prof = zipf(L, tau)
    q = optimal_replication(prof, frac * L).q
    inner = q < 1
    if inner.sum() >= 2:
        r = prof.p[inner] / q[inner] ** 1.5
        assert np.max(np.abs(r / r[0] - 1)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 200), st.floats(0.0, 3.0), st.floats(0.01, 0.99))
def test_beats_uniform_without_caps(L, tau, frac):
    prof = zipf(L, tau)
    # below the threshold no entry is capped and the formula is the exact optimum
    b = frac * min(comimo_threshold(tau, L), L - 0.01)
    opt = replication_objective(prof.p, optimal_replication(prof, b).q)
    uni = replication_objective(prof.p, uniform_replication(L, b).q)
    assert opt <= uni * (1 + 1e-12)


def test_capped_vector_leaves_budget_unused():
    # with a capped entry the surplus is not redistributed, which can lose to uniform
    prof = zipf(2, 1.0)
    q = optimal_replication(prof, 1.75).q
    assert q[0] == 1.0 and q.sum() < 1.75 - 0.05
    assert replication_objective(prof.p, q) > replication_objective(prof.p, uniform_replication(2, 1.75).q)


def test_objective_rejects_zero():
    assert replication_objective([0.5, 0.5], [1.0, 0.0]) == math.inf


def test_cache_plan_small_example():
    q = ReplicationVector(np.array([1.0, 0.5]), 1.5, F=3_000_000)
    plan = build_cache_plan(q, 1_000_000, generate_regular(2, 1.0, 0.25), B_C=4_500_000)
    assert plan.comimo_set == (1,) and plan.multihop_set == (2,)
    assert plan.n_segments == 3
    assert [plan.parity_block(b, 1, s) for b in (0, 1) for s in range(3)] == [(0, 1_000_000)] * 6
    assert plan.parity_block(0, 2, 1) == (0, 500_000)
    assert plan.parity_block(1, 2, 1) == (1, 500_000)
    assert plan.bits_per_bs == 4_500_000
    with pytest.raises(ValueError):
        build_cache_plan(q, 1_000_000, F=3_000_000, B_C=4_000_000)


def test_cache_plan_fractional_block():
    q = ReplicationVector(np.full(3, 0.12), 0.36, F=2_000_000)
    plan = build_cache_plan(q, 1_000_000)
    assert plan.parity_block(4, 1, 0) == (4, 120_000)
    assert plan.bits_per_bs == 6 * 120_000
    assert "1,0.12,multihop" in cache_plan_csv(plan, zipf(3, 0.0))


def test_cache_plan_padding():
    q = ReplicationVector(np.array([1.0, 0.5]), 1.5, F=2_500_000)
    plan = build_cache_plan(q, 1_000_000)
    assert plan.n_segments == 3
    assert plan.parity_block(0, 1, 2) == (0, 500_000)
    assert plan.bits_per_bs == 2_500_000 + 1_250_000


def test_cache_plan_rejects_all_full_and_zero():
    with pytest.raises(ValueError):
        build_cache_plan(ReplicationVector(np.ones(2), 2.0, F=10), 5)
    with pytest.raises(ValueError):
        build_cache_plan(ReplicationVector(np.array([1.0, 0.0]), 1.0, F=10), 5)


def test_requests_single_file():
    assert np.all(draw_requests(zipf(1, 1.0), 50, 0).requests == 1)


def test_requests_deterministic():
    a = draw_requests(zipf(10, 1.0), 200, 9).requests
    assert np.array_equal(a, draw_requests(zipf(10, 1.0), 200, 9).requests)


def test_requests_flat_frequencies():
    L, n = 20, 1_000_000
    req = draw_requests(zipf(L, 0.0), n, 1).requests
    cnt = np.bincount(req, minlength=L + 1)[1:]
    sigma = math.sqrt(n * (1 / L) * (1 - 1 / L))
    assert np.all(np.abs(cnt - n / L) < 3.5 * sigma)
    assert stats.chisquare(cnt).pvalue > 1e-3


def test_regimes():
    r = min_cache_regime(2.0, 10)
    assert r.label == "tau>3/2"
    assert r.threshold == pytest.approx(sum(l ** (-4 / 3) for l in range(1, 11)), rel=1e-14)
    assert min_cache_regime(0.0, 33).threshold == 33
    assert min_cache_regime(0.0, 33).label == "tau<1"
    assert [min_cache_regime(t, 5).label for t in (1.0, 1.2, 1.5)] == ["tau=1", "1<tau<3/2", "tau=3/2"]
    assert str(min_cache_regime(1.0, 5).min_cache) == "Theta(L^1*log(L)^-2)"


def test_threshold_growth_exponent():
    L = np.array([100, 1000, 10_000])
    thr = np.array([comimo_threshold(1.25, int(n)) for n in L])
    # exact oracle: generalised harmonic numbers at high precision
    exact = [float(mpmath.zeta(5 / 6) - mpmath.zeta(5 / 6, int(n) + 1)) for n in L]
    assert thr == pytest.approx(exact, rel=1e-11)
    # the sum itself grows like L^(1/6) once its constant part is removed ...
    slope = np.polyfit(np.log(L), np.log(thr - float(mpmath.zeta(5 / 6))), 1)[0]
    assert abs(slope - 1 / 6) < 0.01
    # ... and the minimum cache order L^(3 - 2 tau) is its cube
    assert abs(3 * slope - (3 - 2 * 1.25)) < 0.05


def test_throughput_order():
    assert throughput_order(0.5, 100, 400.0) == pytest.approx(1 / 20)
    assert throughput_order(2.0, 100, 1e9) == 1.0


def test_extended_scaling():
    d = extended_scaling(1e-4, 10, 1000)
    assert d.backhaul_limited_by == "wired" and d.value == pytest.approx(0.01)
    d = extended_scaling(0.3, 1, 1000)
    assert d.value == pytest.approx(0.3) and not d.loading_clipped
    d = extended_scaling(0.3, 1, 1000, beta=0.3)
    assert d.value == 1.0 and not d.loading_clipped
    d = extended_scaling(0.3, 1, 1000, beta=0.1)
    assert d.value == 1.0 and d.loading_clipped


def test_is_full_tolerance():
    assert list(is_full([1.0, 1 - 1e-13, 0.99])) == [True, True, False]
