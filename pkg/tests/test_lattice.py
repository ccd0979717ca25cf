import random
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from perciso import lattice
from conftest import brute_boundary, open_graph, random_connected_subset


def test_extreme_p_open_everything_or_nothing():
    full = lattice.sample_config(2, 1.0, 123)
    empty = lattice.sample_config(2, 0.0, 123)
    assert full.h_open.all() and full.v_open.all()
    assert not empty.h_open.any() and not empty.v_open.any()


def test_open_fraction_concentrates():
    cfg = lattice.sample_config(50, 0.6, 7)
    assert abs(cfg.open_fraction() - 0.6) < 0.01


def test_pad_defaults_to_n():
    cfg = lattice.sample_config(4, 0.7, 1)
    assert cfg.N == 8
    assert lattice.sample_config(4, 0.7, 1, pad=0).N == 4


def test_capacity_error():
    with pytest.raises(lattice.CapacityError):
        lattice.sample_config(20_000, 0.7, 0)


@given(st.integers(0, 2**63 - 1), st.floats(0.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_sampling_is_deterministic(seed, p):
    a = lattice.sample_config(3, p, seed)
    b = lattice.sample_config(3, p, seed)
    assert np.array_equal(a.h_open, b.h_open) and np.array_equal(a.v_open, b.v_open)


@given(st.integers(0, 10_000), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=30, deadline=None)
def test_coupled_monotonicity_in_p(seed, p1, p2):
    lo, hi = sorted((p1, p2))
    a = lattice.sample_config(4, lo, seed)
    b = lattice.sample_config(4, hi, seed)
    assert not (a.h_open & ~b.h_open).any()
    assert not (a.v_open & ~b.v_open).any()


def test_giant_size_nondecreasing_under_coupling():
    sizes = [len(lattice.giant_component(lattice.sample_config(10, p, 5))) for p in (0.6, 0.7, 0.8, 0.9, 1.0)]
    assert sizes == sorted(sizes)


def test_cluster_labels_match_networkx():
    cfg = lattice.sample_config(6, 0.55, 11)
    lab = lattice.cluster(cfg)
    g = open_graph(cfg)
    assert len(lab.sizes) == nx.number_connected_components(g)
    assert lab.sizes.sum() == cfg.num_vertices
    assert lab.sizes[lab.largest] == max(len(c) for c in nx.connected_components(g))
    for comp in nx.connected_components(g):
        ids = {int(lab.labels[cfg.index(v)]) for v in comp}
        assert len(ids) == 1


def test_cluster_extremes():
    assert len(lattice.cluster(lattice.sample_config(2, 1.0, 0)).sizes) == 1
    assert len(lattice.cluster(lattice.sample_config(2, 0.0, 0)).sizes) == (2 * 4 + 1) ** 2


def test_giant_component_small_cases():
    cfg = lattice.sample_config(2, 1.0, 0)
    assert lattice.giant_component(cfg).vertex_set() == {(x, y) for x in range(-2, 3) for y in range(-2, 3)}
    with pytest.raises(ValueError, match="supercritical"):
        lattice.giant_component(lattice.sample_config(10, 0.3, 0))


def test_giant_fraction_tracks_density():
    theta, _ = lattice.density_estimate(0.6, 60, 6, 99)
    cfg = lattice.sample_config(20, 0.6, 3, pad=20)
    frac = lattice.giant_component(cfg).mask.sum() / 41**2
    assert abs(frac - theta) < 0.1


def test_density_estimate():
    assert lattice.density_estimate(1.0, 5, 3, 0) == (1.0, 0.0)
    assert lattice.density_estimate(0.8, 10, 3, 4) == lattice.density_estimate(0.8, 10, 3, 4)
    with pytest.raises(ValueError):
        lattice.density_estimate(0.8, 10, 0, 4)


def test_nearest_cluster_vertex():
    cfg = lattice.sample_config(3, 1.0, 17)
    assert lattice.nearest_cluster_vertex(cfg, (0.1, 0.2)) == (0, 0)
    want = min([(0, 0), (1, 0)], key=cfg.eta)
    assert lattice.nearest_cluster_vertex(cfg, (0.5, 0.0)) == want


def test_boundary_small_cases():
    cfg = lattice.sample_config(2, 1.0, 0)
    centre = lattice.make_subgraph(cfg, [(0, 0)])
    assert lattice.boundary_size(centre, "within_box") == lattice.boundary_size(centre, "infinite") == 4
    corner = lattice.make_subgraph(cfg, [(2, 2)])
    assert lattice.boundary_size(corner, "within_box") == 2
    assert lattice.boundary_size(corner, "infinite") == 4
    assert lattice.conductance(centre) == 4
    left = lattice.make_subgraph(cfg, [(x, y) for x in (-2, -1) for y in range(-2, 3)])
    assert lattice.conductance(left) == Fraction(1, 2)


def test_boundaries_match_recount():
    rng = random.Random(0)
    for seed in range(8):
        cfg = lattice.sample_config(5, 0.8, seed)
        U = random_connected_subset(cfg, 10, rng)
        sub = lattice.make_subgraph(cfg, U)
        inf = lattice.edge_boundary(sub, "infinite")
        box = lattice.edge_boundary(sub, "within_box")
        assert inf == brute_boundary(cfg, U, "infinite")
        assert box == brute_boundary(cfg, U, "within_box")
        assert box <= inf
        assert lattice.conductance(sub) == Fraction(len(box), len(U))


def test_make_subgraph_rejects_outsiders():
    cfg = lattice.sample_config(3, 1.0, 0)
    with pytest.raises(ValueError):
        lattice.make_subgraph(cfg, [(5, 0)])
    with pytest.raises(ValueError):
        lattice.make_subgraph(cfg, [])


def test_snapshot_round_trip(tmp_path):
    cfg = lattice.sample_config(7, 0.65, 2**40 + 3, pad=3)
    path = tmp_path / "c.pcfg"
    lattice.save_config(cfg, path)
    back = lattice.load_config(path)
    assert (back.n, back.pad, back.p, back.seed) == (cfg.n, cfg.pad, cfg.p, cfg.seed)
    assert np.array_equal(back.h_open, cfg.h_open) and np.array_equal(back.v_open, cfg.v_open)
    assert path.read_bytes()[:4] == b"PCFG"
    path.write_bytes(b"junk")
    with pytest.raises(ValueError):
        lattice.load_config(path)
