import json
import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perciso import boundary_norm as bn, lattice, rightmost as rm
from conftest import STEPS, oracle_is_rightmost, oracle_right_boundary


def brute_distance(cfg, x, y, bound=math.inf):
    """Minimum open right-boundary count over open right-most paths, by plain DFS with the angle oracle.

    Only values <= ``bound`` are searched for; inf comes back if none exists.
    """
    best = [bound + 1]

    def weight(vs):
        return len({tuple(sorted(d)) for d in oracle_right_boundary(vs)
                    if cfg.in_box(d[1]) and cfg.is_open(*d)})

    def rec(vs, used):
        # a prefix never weighs more than any extension of it
        wt = weight(vs)
        if vs[-1] == y:
            best[0] = min(best[0], wt)
            return
        if wt >= best[0]:
            return
        v = vs[-1]
        for dx, dy in STEPS:
            w = (v[0] + dx, v[1] + dy)
            if not cfg.in_box(w) or not cfg.is_open(v, w) or (v, w) in used:
                continue
            nxt = vs + [w]
            if oracle_is_rightmost(nxt):
                used.add((v, w))
                rec(nxt, used)
                used.discard((v, w))

    rec([x], set())
    return best[0] if best[0] <= bound else math.inf


def test_straight_line_at_full_density():
    cfg = lattice.sample_config(4, 1.0, 0, pad=0)
    for k in range(1, 5):
        for mode in ("dijkstra_relaxation", "exact_enumeration"):
            assert bn.right_boundary_distance(cfg, (0, 0), (k, 0), mode).value == k - 1


def test_same_point_is_zero():
    cfg = lattice.sample_config(3, 1.0, 0)
    res = bn.right_boundary_distance(cfg, (1, 1), (1, 1))
    assert res.value == 0 and len(res.witness) == 0


def test_disconnected_endpoints():
    cfg = lattice.sample_config(3, 0.0, 0)
    with pytest.raises(bn.NoPathError, match="no open right-most path"):
        bn._relaxed(cfg, (0, 0), (1, 0))


def test_modes_agree_with_plain_dfs_on_tiny_boxes():
    rng = random.Random(4)
    checked = 0
    for seed in range(12):
        cfg = lattice.sample_config(2, 0.7, seed, pad=0)
        giant = sorted(lattice.giant_component(cfg).vertex_set())
        if len(giant) < 2:
            continue
        for _ in range(3):
            x, y = rng.sample(giant, 2)
            relaxed = bn.right_boundary_distance(cfg, x, y)
            # a validated witness is itself a right-most path, so its weight bounds the search
            bound = rm.path_weight(relaxed.witness, cfg) if relaxed.flag == bn.VALIDATED else math.inf
            want = brute_distance(cfg, x, y, bound)
            exact = bn.right_boundary_distance(cfg, x, y, "exact_enumeration")
            assert exact.value == want
            if relaxed.flag == bn.VALIDATED:
                assert relaxed.value == want
            checked += 1
    assert checked >= 20


def test_witness_contract():
    rng = random.Random(9)
    for seed in range(10):
        cfg = lattice.sample_config(4, 0.8, seed)
        giant = sorted(lattice.giant_component(cfg).vertex_set())
        x, y = rng.sample(giant, 2)
        res = bn.right_boundary_distance(cfg, x, y)
        w = res.witness
        assert w.vertices[0] == x and w.vertices[-1] == y
        assert all(cfg.is_open(a, b) for a, b in w.darts)
        assert res.value >= 0
        if res.flag != bn.UNVALIDATED:
            assert rm.is_rightmost(w) and rm.path_weight(w, cfg) == res.value


def test_beta_at_full_density():
    est = bn.estimate_beta(1.0, (1, 0), [4, 8, 16], 2, 0)
    assert est.scale_means == [0.75, 0.875, 0.9375]
    assert abs(est.beta - 1.0) <= 1 / 16
    beta, stderr = est
    assert stderr == 0.0 and est.censored == 0


def test_beta_rejects_bad_arguments():
    with pytest.raises(ValueError):
        bn.estimate_beta(0.4, (1, 0), [4], 1, 0)
    with pytest.raises(ValueError):
        bn.estimate_beta(0.8, (1, 0), [8, 4], 1, 0)
    with pytest.raises(ValueError):
        bn.estimate_beta(0.8, (1, 0), [4], 0, 0)


def test_beta_swap_invariance():
    a = bn.estimate_beta(0.8, (3, 1), [6], 3, 5)
    b = bn.estimate_beta(0.8, (1, 3), [6], 3, 5)
    c = bn.estimate_beta(0.8, (-1, -3), [6], 3, 5)
    assert a.beta == b.beta == c.beta


@pytest.fixture(scope="module")
def table():
    return bn.build_norm_table(0.8, 4, [6, 10], 3, 1)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.01, 10))
@settings(max_examples=200, deadline=None)
def test_table_symmetry_and_homogeneity(table, u, w, c):
    if u == 0 and w == 0:
        return
    v = table(u, w)
    for a, b in ((w, u), (-u, w), (u, -w), (-w, -u)):
        assert table(a, b) == v
    assert table(c * u, c * w) == pytest.approx(c * v, rel=1e-12)


def test_table_round_trip(table, tmp_path):
    path = tmp_path / "t.json"
    table.save(path)
    back = bn.NormTable.load(path)
    assert np.array_equal(back.values, table.values) and np.array_equal(back.angles, table.angles)
    assert json.loads(path.read_text())["format"] == "perciso-normtable"
    with pytest.raises(ValueError):
        bn.NormTable.from_dict({"format": "other"})


def test_table_resolution_two_at_full_density():
    t = bn.build_norm_table(1.0, 2, [4, 8], 1, 0)
    assert t.values[0] == pytest.approx(0.875)
    assert t(1, 0) == t(0, 1) == t(-1, 0) == t(0, -1)
    with pytest.raises(ValueError):
        bn.build_norm_table(1.0, 1, [4], 1, 0)


def test_triangle_spot_check(table):
    assert table.triangle_violations(1000, seed=2) == 0


def test_geodesic_concentration():
    cfg = lattice.sample_config(6, 1.0, 0)
    rep = bn.geodesic_concentration(cfg, (-4, 0), (4, 0))
    assert rep.deviation <= 1 / 8
    assert bn.geodesic_concentration(cfg, (1, 1), (1, 1)).deviation == 0.0


def test_length_comparison_is_positive():
    lc = bn.length_comparison(0.85, 24, 6, 3, min_length=20)
    assert lc.ratios and lc.minimum > 0
