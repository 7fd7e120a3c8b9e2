import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdwn.topology import (NetworkTopology, PlacementParams, associate, dumps_topology,
                           generate_perturbed_grid, generate_regular, loads_topology,
                           nearest_bs_ranking, placement_params_regular, validate_placement)

from conftest import field_params


def test_regular_counts(grid12):
    assert grid12.n_bs == 144
    assert grid12.n_users == 576
    assert np.all(grid12.users_per_cell() == 4)


def test_regular_two_by_two():
    t = generate_regular(2, 1.0, 0.25)
    base = t.bs_positions - t.bs_positions.min(axis=0)
    assert sorted(map(tuple, base)) == [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
    assert t.n_users == 16
    d = np.hypot(*(t.user_positions - t.bs_positions[t.association]).T)
    assert np.allclose(d, 0.25)


def test_regular_users_on_grid_lines(grid12):
    off = grid12.user_positions - grid12.bs_positions[grid12.association]
    # exactly one coordinate of every offset is zero
    assert np.all(np.sum(np.isclose(off, 0.0), axis=1) == 1)


def test_regular_cells_are_squares(grid12):
    poly = grid12.cell_polygon(50)
    span = poly.max(axis=0) - poly.min(axis=0)
    assert np.allclose(span, 100.0)
    reach = np.max(np.hypot(*(poly - grid12.bs_positions[50]).T))
    assert reach == pytest.approx(100.0 / math.sqrt(2))


def test_regular_15_validates():
    t = generate_regular(15, 100.0, 20.0)
    p = PlacementParams(225, 900, 100.0, 50 * math.sqrt(2), 20.0, 4, 1, 100.0)
    rep = validate_placement(t, p)
    assert rep.ok
    assert rep.min_bs_pairwise_distance == pytest.approx(100.0)
    assert rep.max_point_to_bs_distance == pytest.approx(50 * math.sqrt(2))
    assert rep.users_per_bs_ratio == 4.0


def test_regular_rejects_bad_offset():
    with pytest.raises(ValueError):
        generate_regular(4, 1.0, 0.5)
    with pytest.raises(ValueError):
        generate_regular(1, 1.0, 0.2)


def test_field_topology_valid(field15):
    assert field15.n_bs == 225 and field15.n_users == 900
    rep = validate_placement(field15, field_params())
    assert rep.ok, rep.violations
    assert rep.max_users_per_cell <= 8
    assert len(field15.backhaul_set) == 10


def test_zero_jitter_on_lattice():
    t = generate_perturbed_grid(field_params(4, 32, 1), 0.0, 3)
    ix = (t.bs_positions - 50.0) / 100.0
    assert np.allclose(ix, np.round(ix))


def test_same_seed_identical():
    a = generate_perturbed_grid(field_params(6, 100, 2), 50.0, 11)
    b = generate_perturbed_grid(field_params(6, 100, 2), 50.0, 11)
    assert dumps_topology(a) == dumps_topology(b)
    c = generate_perturbed_grid(field_params(6, 100, 2), 50.0, 12)
    assert dumps_topology(a) != dumps_topology(c)


def test_jitter_precondition():
    with pytest.raises(ValueError):
        generate_perturbed_grid(field_params(4, 16, 1), 60.0, 1)
    with pytest.raises(ValueError):
        generate_perturbed_grid(field_params(4, 16 * 9, 1), 50.0, 1)


def test_constructed_bs_violation():
    bs = np.array([[10.0, 10.0], [35.0, 10.0]])
    t = NetworkTopology(bs, np.zeros((0, 2)), 100.0, np.zeros(0, int), (0,))
    p = PlacementParams(2, 0, 50.0, 200.0, 1.0, 4, 1, 50.0)
    rep = validate_placement(t, p)
    assert ("bs_distance", [(0, 1)]) in rep.violations


def test_constructed_user_violations():
    bs = np.array([[25.0, 50.0], [75.0, 50.0]])
    ue = np.array([[26.0, 50.0], [70.0, 50.0], [80.0, 50.0]])
    t = NetworkTopology(bs, ue, 100.0, associate(bs, ue), (0,))
    p = PlacementParams(2, 3, 10.0, 200.0, 2.0, 1, 1, 50.0)
    rules = dict(validate_placement(t, p).violations)
    assert rules["bs_user_distance"] == [(0, 0)]
    assert rules["cell_load"] == [1]


def test_ranking_regular_interior(grid12):
    n = 5 * 12 + 5
    r = nearest_bs_ranking(grid12, n)
    assert r[0] == (n, 0.0)
    assert [d for _, d in r[1:5]] == pytest.approx([100.0] * 4)
    assert [d for _, d in r[5:9]] == pytest.approx([100.0 * math.sqrt(2)] * 4)
    # ties by index
    assert [i for i, _ in r[1:5]] == sorted(i for i, _ in r[1:5])


def test_ranking_single_bs():
    t = NetworkTopology(np.array([[1.0, 1.0]]), np.zeros((0, 2)), 2.0, np.zeros(0, int), (0,))
    assert nearest_bs_ranking(t, 0) == [(0, 0.0)]


def test_ranking_matches_brute_force():
    t = generate_perturbed_grid(field_params(7, 150, 3), 50.0, 5)
    for b in (0, 17, 48):
        got = [i for i, _ in nearest_bs_ranking(t, b)]
        d = [math.dist(t.bs_positions[b], t.bs_positions[i]) for i in range(t.n_bs)]
        want = sorted(range(t.n_bs), key=lambda i: (d[i], i))
        assert got == want


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_association_is_nearest(seed):
    t = generate_perturbed_grid(field_params(5, 80, 2), 50.0, seed)
    d = t.user_bs_distances()
    own = d[np.arange(t.n_users), t.association]
    assert np.all(own <= d.min(axis=1) + 1e-12)
    assert validate_placement(t, field_params(5, 80, 2)).ok


def test_serialization_roundtrip(field15, tmp_path):
    text = dumps_topology(field15)
    assert text.splitlines()[3].startswith("BS 0 ")
    back = loads_topology(text)
    assert dumps_topology(back) == text
    assert back.backhaul_set == field15.backhaul_set
    assert np.allclose(back.bs_positions, field15.bs_positions, atol=1e-6)
    reg = generate_regular(3, 10.0, 2.0)
    again = loads_topology(dumps_topology(reg))
    assert again.is_regular and again.user_offset == 2.0


def test_malformed_record():
    with pytest.raises(ValueError):
        loads_topology("BS 0 1.0\n")


def test_regular_params_helper():
    p = placement_params_regular(4, 1.0, 0.2)
    assert validate_placement(generate_regular(4, 1.0, 0.2), p).ok
