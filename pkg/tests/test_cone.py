from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conegrowth import cayley as C
from conegrowth import cone as K
from conegrowth import groups as G
from conegrowth import models as M
from conegrowth.errors import EmptyCloud, FloodUnbounded
from conegrowth.finite import cyclic_table

H = G.heisenberg()
Z1 = G.free_abelian(1)
Z2 = G.free_abelian(2)
KH = K.cone_kind(H)
KE = K.ConeKind(K.EUCLID, 2)
ONE = M.IidFpp(M.Constant(1.0))
FIVE = M.ColoringFpp((0.2,) * 5)

reals = st.floats(-50, 50, allow_nan=False)
hpoints = st.tuples(reals, reals, reals).map(np.array)
pos = st.floats(0.01, 20)


def test_rescale_examples():
    assert np.array_equal(K.rescale(Z2, (6, -4), 2), [3, -2])
    assert np.array_equal(K.rescale(H, H.identity, 3.5), [0, 0, 0])
    p = K.to_matrix_coords(K.rescale(H, G.power(H, (1, 1, 0), 4096), 4096))
    assert np.allclose(p, [1, 1, 0.5], atol=1e-3)


def test_dihedral_and_product_rescale_through_quotient():
    D = G.dihedral(2)
    assert np.array_equal(K.rescale(D, (4, 6, 1), 2), [-2, -3])
    P = G.direct_product_finite(Z2, cyclic_table(3), [1, 2])
    assert np.array_equal(K.rescale(P, (4, 6, 2), 2), [2, 3])


@given(st.integers(-30, 30), st.integers(-30, 30), st.integers(-300, 300), st.integers(1, 64))
def test_rescaled_power_against_closed_form(x, y, z, n):
    """The definition differs from the printed closed form by exactly xy/(2n)."""
    p = K.to_matrix_coords(K.rescale(H, G.power(H, (x, y, z), n), n))
    printed = np.array([x, y, z / n - x * y / n + x * y / 2])
    assert np.allclose(p[:2], printed[:2], rtol=1e-12, atol=0)
    assert p[2] - printed[2] == pytest.approx(x * y / (2 * n), rel=1e-12, abs=1e-12)


def test_grade_two_gap_is_order_one_over_n():
    x = (3, -2, 5)
    gaps = [abs(K.rescale(H, G.power(H, x, n), n)[2]) for n in (8, 16, 32, 64)]
    assert all(g * n == pytest.approx(abs(x[2] - x[0] * x[1] / 2)) for g, n in zip(gaps, (8, 16, 32, 64)))


def test_dilate_examples():
    assert np.array_equal(K.dilate([1, 2, 3], 2, KH), [2, 4, 12])
    assert np.array_equal(K.dilate([1, 2, 3], 1, KH), [1, 2, 3])
    assert np.array_equal(K.dilate([0, 0, 0], 7, KH), [0, 0, 0])


@given(hpoints, st.sampled_from([0.25, 0.5, 2.0, 4.0, 8.0]), st.sampled_from([0.5, 2.0, 16.0]))
def test_dilation_composition_exact_for_dyadic(p, s, t):
    assert np.array_equal(K.dilate(K.dilate(p, s, KH), t, KH), K.dilate(p, s * t, KH))


@given(hpoints, pos, pos)
def test_dilation_composition(p, s, t):
    assert np.allclose(K.dilate(K.dilate(p, s, KH), t, KH), K.dilate(p, s * t, KH), rtol=1e-12, atol=1e-9)


@given(hpoints, pos)
def test_quasi_norm_homogeneous(p, t):
    assert K.quasi_norm(K.dilate(p, t, KH), KH) == pytest.approx(t * K.quasi_norm(p, KH), rel=1e-12, abs=1e-12)
    assert np.allclose(K.project_ab(K.dilate(p, t, KH), KH), t * K.project_ab(p, KH))


def test_quasi_norm_examples():
    assert K.quasi_norm([0, 0, 1], KH) == 1
    assert K.quasi_norm([0, 0, 0], KH) == 0
    assert K.quasi_norm([3, 4], KE) == 5
    assert np.array_equal(K.project_ab([1.5, -2, 9], KH), [1.5, -2])


@given(hpoints, hpoints, hpoints)
def test_cone_group_law(p, q, r):
    lhs = K.cone_mul(K.cone_mul(p, q, KH), r, KH)
    rhs = K.cone_mul(p, K.cone_mul(q, r, KH), KH)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-6)
    assert np.allclose(K.cone_mul(p, K.cone_inv(p, KH), KH), 0)
    assert K.distance(p, q, KH) == pytest.approx(K.distance(q, p, KH))


def test_cone_law_matches_group_law_on_lattice():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = (tuple(int(v) for v in rng.integers(-9, 10, 3)) for _ in range(2))
        lhs = K.rescale(H, G.multiply(H, a, b), 1.0)
        rhs = K.cone_mul(K.rescale(H, a, 1.0), K.rescale(H, b, 1.0), KH)
        assert np.allclose(lhs, rhs)


def cloud(points, kind=KE):
    return K.ShapeCloud(np.asarray(points, dtype=float), kind)


def test_hausdorff_examples():
    a = cloud([[0.0], [1.0]], K.ConeKind(K.EUCLID, 1))
    assert K.hausdorff(a, a) == 0
    assert K.hausdorff(cloud([[0.0]], K.ConeKind(K.EUCLID, 1)), cloud([[1.0]], K.ConeKind(K.EUCLID, 1))) == 1
    with pytest.raises(EmptyCloud):
        K.hausdorff(cloud(np.zeros((0, 2))), a)


@given(st.lists(st.tuples(reals, reals, reals), min_size=1, max_size=12),
       st.lists(st.tuples(reals, reals, reals), min_size=1, max_size=12))
def test_hausdorff_refinement_and_symmetry(a, b):
    A, B = cloud(a, KH), cloud(b, KH)
    assert K.hausdorff(A, B) == pytest.approx(K.hausdorff(B, A))
    assert K.hausdorff(A, A.union(B)) <= K.hausdorff(A, B) + 1e-9


@given(st.lists(st.tuples(reals, reals, reals), min_size=1, max_size=10),
       st.lists(st.tuples(reals, reals, reals), min_size=1, max_size=10),
       st.sampled_from([0.5, 2.0, 4.0]))
def test_hausdorff_dilation_homogeneous(a, b, t):
    A, B = cloud(a, KH), cloud(b, KH)
    assert K.hausdorff(A.dilate(t), B.dilate(t)) == pytest.approx(t * K.hausdorff(A, B), rel=1e-12, abs=1e-12)


def test_hausdorff_heisenberg_chunking_matches_direct():
    rng = np.random.default_rng(3)
    A, B = cloud(rng.normal(size=(300, 3)), KH), cloud(rng.normal(size=(200, 3)), KH)
    d = K.distance(A.points[:, None, :], B.points[None, :, :], KH)
    direct = max(d.min(axis=1).max(), d.min(axis=0).max())
    assert K._directed(A.points, B.points, KH, chunk=17) == pytest.approx(d.min(axis=1).max())
    assert K.hausdorff(A, B) == pytest.approx(direct)


def test_extract_shape_examples():
    env = M.Environment(0)
    s = K.extract_shape(Z2, ONE, env, 10)
    l1 = K.ShapeCloud(K.fill_polygon([[1, 0], [0, 1], [-1, 0], [0, -1]], 0.01), KE)
    assert K.hausdorff(s, l1) <= 0.1
    zero = K.extract_shape(Z2, FIVE, env, 0)
    assert np.array_equal(zero.points, [[0, 0]])
    big = K.extract_shape(Z2, FIVE, env, 30)
    word = C.grow_ball(Z2, 30).coords / 30.0
    got = {tuple(p) for p in np.round(big.points * 30).astype(int).tolist()}
    assert all(tuple(p) in got for p in np.round(word * 30).astype(int).tolist())


def test_extract_shape_matches_direct_dijkstra():
    env = M.Environment(4)
    n = 6.0
    s = K.extract_shape(Z2, FIVE, env, n)
    f = M.passage_times(FIVE, env, Z2, 60)
    want = f.ball.coords[f.dist <= n] / n
    assert {tuple(p) for p in s.points.tolist()} == {tuple(p) for p in want.tolist()}


def test_flood_unbounded():
    with pytest.raises(FloodUnbounded):
        K.extract_shape(Z2, M.ColoringFpp((0.9, 0.1)), M.Environment(1), 20, max_radius=25)


def test_heisenberg_shape_stabilises():
    env = M.Environment(0)
    d = [K.hausdorff(K.extract_shape(H, ONE, env, n), K.extract_shape(H, ONE, env, 2 * n)) for n in (2, 4, 8)]
    assert d[2] < d[0]


def test_phi_polygon_and_csv(tmp_path):
    dirs = K.direction_fan(16)
    assert len(dirs) == 16 and len(set(dirs)) == 16
    poly = K.phi_polygon(dirs, [sum(map(abs, d)) for d in dirs])  # the l1 norm
    assert np.allclose(np.abs(poly).sum(axis=1), 1)
    c = K.polygon_cloud(dirs, [sum(map(abs, d)) for d in dirs], 0.05)
    assert np.all(np.abs(c.points).sum(axis=1) <= 1 + 1e-9)
    p = tmp_path / "c.csv"
    K.extract_shape(Z2, ONE, M.Environment(3), 2).to_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "n,p0,p1,seed" and len(lines) == 14
    assert math.isclose(float(lines[1].split(",")[0]), 2.0)
