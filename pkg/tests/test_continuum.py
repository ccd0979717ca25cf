import math

import numpy as np
import pytest
from hypothesis import assume, example, given, settings, strategies as st

from perciso import boundary_norm as bn, continuum as ct, geometry, lattice, rightmost as rm
from perciso.continuum import Polygon

E, L1, LINF = ct.EuclideanNorm(), ct.L1Norm(), ct.LinfNorm()
LEFT_HALF = Polygon(np.array([[-1, -1], [0, -1], [0, 1], [-1, 1]], dtype=float))
SQUARE = Polygon(ct.SQUARE.copy())


def random_convex(rng, k=9, radius=0.6):
    th = np.sort(rng.uniform(0, 2 * np.pi, k))
    r = rng.uniform(0.3, radius)
    centre = rng.uniform(-0.2, 0.2, 2)
    pts = centre + r * np.column_stack([np.cos(th), np.sin(th)])
    return Polygon(pts)


def test_norms_are_homogeneous_and_positive():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(200, 2))
    c = rng.uniform(-3, 3, 200)
    for norm in (E, L1, LINF, ct.ScaledNorm(E, 2.5)):
        base = norm(v[:, 0], v[:, 1])
        assert np.all(base > 0)
        assert np.allclose(norm(c * v[:, 0], c * v[:, 1]), np.abs(c) * base, rtol=1e-13)


def test_load_norm(tmp_path):
    assert isinstance(ct.load_norm("l1"), ct.L1Norm)
    t = bn.build_norm_table(1.0, 2, [4], 1, 0)
    path = tmp_path / "n.json"
    t.save(path)
    assert ct.load_norm(str(path))(1, 0) == pytest.approx(0.75)
    with pytest.raises(FileNotFoundError):
        ct.load_norm("nonexistent-norm")


def test_surface_energy_examples():
    assert ct.surface_energy(LEFT_HALF, E) == 2.0
    corner = Polygon(np.array([[-1, -1], [-0.5, -1], [-0.5, -0.5], [-1, -0.5]]))
    assert ct.surface_energy(corner, L1) == 1.0
    rng = np.random.default_rng(1)
    for _ in range(20):
        poly = random_convex(rng)
        v = poly.vertices
        perim = float(np.sum(np.hypot(*(np.roll(v, -1, axis=0) - v).T)))
        assert abs(ct.surface_energy(poly, E) - perim) < 1e-12


def test_area_examples():
    assert ct.area(SQUARE) == 4.0 and ct.area(LEFT_HALF) == 2.0
    tri = np.array([[0.1, 0.2], [0.7, -0.3], [-0.4, 0.5]])
    cross = (tri[1, 0] - tri[0, 0]) * (tri[2, 1] - tri[0, 1]) - (tri[1, 1] - tri[0, 1]) * (tri[2, 0] - tri[0, 0])
    assert ct.area(Polygon(tri)) == pytest.approx(0.5 * abs(cross), abs=1e-15)


def test_polygon_validation():
    with pytest.raises(ValueError):
        Polygon(np.array([[0, 0], [0.5, 0.5], [0.5, 0], [0, 0.5]]))  # bow-tie
    with pytest.raises(ValueError):
        Polygon(np.array([[0, 0], [0.5, 0], [1.0, 0]]))
    with pytest.raises(ValueError):
        Polygon(np.array([[0, 0], [2, 0], [0, 2]]))
    cw = Polygon(np.array([[0, 0], [0, 0.5], [0.5, 0]]))
    assert geometry.signed_area(cw.vertices) > 0


def test_restricted_energy_bounded_by_full_perimeter():
    rng = np.random.default_rng(2)
    for _ in range(20):
        poly = random_convex(rng)
        assert ct.surface_energy(poly, L1) == pytest.approx(ct.norm_perimeter(poly, L1), abs=1e-13)
    assert ct.surface_energy(LEFT_HALF, E) < ct.norm_perimeter(LEFT_HALF, E)


@pytest.mark.parametrize("norm", [E, L1, LINF])
def test_edge_form_agrees_for_symmetric_norms(norm):
    rng = np.random.default_rng(3)
    for _ in range(10):
        poly = random_convex(rng)
        assert ct.surface_energy_edge_form(poly, norm) == pytest.approx(ct.surface_energy(poly, norm), rel=1e-13)


def test_wulff_shapes():
    disc = ct.wulff_shape(E, 360)
    assert abs(ct.area(disc) - math.pi) / math.pi < 0.01
    sq = ct.wulff_shape(L1, 16)
    assert np.allclose(np.sort(np.abs(sq.vertices).max(axis=0)), [1, 1])
    assert ct.area(sq) == pytest.approx(4.0)
    big = ct.wulff_shape(ct.ScaledNorm(E, 2.0), 360)
    assert ct.area(big) == pytest.approx(4 * ct.area(disc), rel=1e-9)
    with pytest.raises(ValueError):
        ct.wulff_shape(E, 4)


def test_wulff_is_convex_and_symmetric():
    t = bn.build_norm_table(0.8, 3, [6], 2, 0)
    W = ct.wulff_shape(ct.TableNorm(t), 360).vertices
    d1 = np.roll(W, -1, axis=0) - W
    d2 = np.roll(d1, -1, axis=0)
    assert np.all(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0] >= -1e-12)
    for flip in (np.array([-1, 1]), np.array([1, -1])):
        assert ct.hausdorff_distance(W, W * flip, 0.01) < 1e-9
    assert ct.hausdorff_distance(W, W[:, ::-1], 0.01) < 1e-9


def test_quarter_wulff_values():
    val, poly, clamped = ct.quarter_wulff_conductance(E, 0.0)
    r = math.sqrt(8 / math.pi)
    assert val == pytest.approx(2 / r, rel=1e-3) and not clamped
    assert ct.area(poly) == pytest.approx(2.0, rel=1e-9)
    val, poly, _ = ct.quarter_wulff_conductance(L1, 0.0)
    assert val == pytest.approx(math.sqrt(2), rel=1e-9)


def test_complement_conductance_relation():
    alpha = 0.3
    val, poly, _ = ct.quarter_wulff_conductance(E, alpha)
    region = ct.region_from_polygon(poly, 40)
    comp = region.complement().polygon()
    energy = ct.surface_energy(poly, E)
    assert ct.conductance(comp, E) == pytest.approx(energy / (4 - (2 + alpha)), rel=1e-3)


def test_half_wulff_is_clamped_for_euclidean():
    val, poly, clamped = ct.half_wulff_conductance(E, 0.0)
    assert clamped and ct.area(poly) < 2.0


@pytest.mark.parametrize("alpha", [-0.5, -0.25, 0.0, 0.25, 0.7])
def test_straight_cut_closed_form(alpha):
    val, poly, _ = ct.straight_cut_conductance(E, alpha)
    assert ct.area(poly) == pytest.approx(2 + alpha, abs=1e-9)
    assert val == pytest.approx(2 / (2 + alpha) if alpha >= 0 else 2 / (2 + alpha), rel=1e-6)


# endpoints anywhere on the boundary, or within a hair of a corner
PERIMETER = st.one_of(st.floats(0, 8, exclude_max=True),
                      st.builds(lambda k, e: (2.0 * k + e) % 8.0, st.integers(0, 3), st.floats(-1e-7, 1e-7)))


@given(PERIMETER, st.floats(1.0, 6.0),
       st.lists(st.tuples(st.floats(-0.9, 0.9), st.floats(-0.9, 0.9)), min_size=1, max_size=5),
       st.sampled_from([E, L1, LINF]))
@settings(max_examples=150, deadline=None)
@example(1e-12, 2.0, [(0.0, 0.0)], E)  # endpoints a hair away from corners
@example(1e-12, 1.0, [(0.0, 0.0)], E)
@example(2.0 - 1e-11, 3.0, [(0.2, -0.1)], L1)
def test_region_and_complement_share_energy(s0, gap, ctrl, norm):
    region = ct.CandidateRegion(s0, (s0 + gap) % 8.0, np.array(ctrl), 0)
    assume(region.is_valid() and region.complement().is_valid())
    a, b = region.polygon(), region.complement().polygon()
    assert ct.surface_energy(a, norm) == ct.surface_energy(b, norm)
    assert ct.area(a) + ct.area(b) == pytest.approx(4.0, abs=1e-12)


@pytest.fixture(scope="module")
def euclid_zero():
    return ct.solve_restricted(E, 0.0, seed=0)


def test_solver_beats_families_at_zero(euclid_zero):
    res = euclid_zero
    assert res.phi_hat <= 1.0 + 1e-3
    assert all(res.phi_hat <= v for v in res.families.values())
    assert res.families["quarter_wulff"] == pytest.approx(1.2533, abs=1e-3)
    assert res.phi_hat == ct.conductance(res.optimizer, E)
    assert ct.area(res.optimizer) == pytest.approx(2.0, abs=1e-6)


def test_solver_is_deterministic(euclid_zero):
    again = ct.solve_restricted(E, 0.0, seed=0)
    assert again.to_dict() == euclid_zero.to_dict()


def test_solver_rejects_bad_arguments():
    with pytest.raises(ValueError):
        ct.solve_restricted(E, 1.5)
    with pytest.raises(ValueError):
        ct.solve_restricted(E, 0.0, control_points=0)


def test_weak_monotonicity():
    res = ct.solve_monotone(L1, [-0.25, 0.0, 1.0], iterations=300, restarts=1)
    vals = [res[a].phi_hat for a in (-0.25, 0.0, 1.0)]
    assert vals[0] >= vals[1] >= vals[2]


def test_duality_residual():
    resid, plus, minus = ct.duality_residual(E, 0.25, iterations=300, restarts=1)
    assert resid <= 0.02 * plus


def test_result_serialisation(euclid_zero):
    d = euclid_zero.to_dict()
    assert d["phi_hat"] == float(f"{euclid_zero.phi_hat:.12g}")
    back = Polygon.from_dict(d["optimizer"])
    assert ct.area(back) == pytest.approx(ct.area(euclid_zero.optimizer), abs=1e-10)


def test_polygonal_approximation_identity_case():
    curve = rm.PlanarCurve(np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float), True)
    out = ct.polygonal_approximation(curve, E, 0.1)
    assert np.array_equal(out.points, curve.points)
    with pytest.raises(ValueError):
        ct.polygonal_approximation(curve, E, 0.0)


def test_polygonal_approximation_of_circle():
    th = np.linspace(0, 2 * np.pi, 2000, endpoint=False)
    curve = rm.PlanarCurve(0.8 * np.column_stack([np.cos(th), np.sin(th)]), True)
    out = ct.polygonal_approximation(curve, E, 0.05)
    assert len(out.points) < len(curve.points)
    assert out.is_simple()
    assert ct.hausdorff_distance(curve, out, 0.005) <= 0.05
    assert out.length <= curve.length + 0.05
    assert abs(abs(out.signed_area()) - abs(curve.signed_area())) <= 0.05


def test_polygonal_approximation_of_rounded_interface():
    cfg = lattice.sample_config(6, 0.8, 2)
    dec = rm.circuit_decomposition(lattice.giant_component(cfg))
    out = ct.polygonal_approximation(dec.outer_curve, E, 0.5)
    assert out.is_simple() and len(out.points) < len(dec.outer_curve.points)
    scaled = out.points / (cfg.n + 0.5)
    assert ct.area(Polygon(scaled)) > 0


def test_hausdorff_examples():
    sq = Polygon(np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]))
    assert ct.hausdorff_distance(sq, sq) == 0.0
    assert ct.hausdorff_distance([[0, 0]], [[0.2, -0.5]]) == 0.5
    shifted = Polygon(sq.vertices + [0.3, 0.0])
    assert abs(ct.hausdorff_distance(sq, shifted, 0.01) - 0.3) <= 0.01
    with pytest.raises(ValueError):
        ct.hausdorff_distance(np.zeros((0, 2)), sq)


def test_hausdorff_matches_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a = rng.uniform(-1, 1, (rng.integers(1, 60), 2))
        b = rng.uniform(-1, 1, (rng.integers(1, 60), 2))
        gaps = np.abs(a[:, None, :] - b[None, :, :]).max(axis=2)
        want = max(gaps.min(axis=1).max(), gaps.min(axis=0).max())
        assert ct.hausdorff_distance(a, b) == want
