from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conegrowth import cayley as C
from conegrowth import groups as G
from conegrowth.errors import MemoryBudgetExceeded, NotInBall, UnsupportedKind
from conegrowth.finite import cyclic_table

H = G.heisenberg()
Z2 = G.free_abelian(2)


def naive_spheres(spec, R):
    """Independent oracle: breadth-first search with Python sets and scalar products."""
    seen = {spec.identity}
    frontier = [spec.identity]
    sizes = [1]
    for _ in range(R):
        nxt = set()
        for g in frontier:
            for s in spec.generators:
                h = G.multiply(spec, s, g)
                if h not in seen:
                    nxt.add(h)
        seen |= nxt
        frontier = list(nxt)
        sizes.append(len(nxt))
    return sizes, seen


def test_small_examples():
    assert len(C.grow_ball(H, 1)) == 5
    assert C.word_norm(H, (0, 0, 1)) == 4
    assert len(C.grow_ball(Z2, 2)) == 13
    assert C.word_norm(H, H.identity) == 0


def test_heisenberg_sphere_sizes_match_naive_enumeration():
    sizes, elems = naive_spheres(H, 6)
    ball = C.grow_ball(H, 6)
    assert list(ball.sphere_sizes) == sizes
    assert {tuple(r) for r in ball.coords.tolist()} == elems


@pytest.mark.parametrize("spec", [G.dihedral(2), G.direct_product_finite(Z2, cyclic_table(3), [1, 2])],
                         ids=["dihedral", "dpf"])
def test_other_kinds_match_naive_enumeration(spec):
    sizes, elems = naive_spheres(spec, 5)
    ball = C.grow_ball(spec, 5)
    assert list(ball.sphere_sizes) == sizes
    assert {tuple(r) for r in ball.coords.tolist()} == elems


def test_word_norm_examples():
    for m in range(21):
        assert C.word_norm(H, (m, 0, 0)) == m
    ms = [1, 4, 16, 64, 256]
    ratios = [C.word_norm(H, (0, 0, m), 256) / math.sqrt(m) for m in ms]
    assert max(ratios) <= 2 * min(ratios)
    assert C.word_norm(H, (0, 0, 5), cap=3) is None


def test_ball_invariants():
    ball = C.grow_ball(H, 8)
    assert ball.norms[0] == 0 and ball.pred[0] == -1
    # every non-identity element has a predecessor one sphere down
    gens = H.generator_array
    inv = np.asarray(H.inverse_generator)
    parents = G.mul_batch(H, gens[inv[ball.pred[1:]]], ball.coords[1:])
    pidx = ball.index_of(parents)
    assert np.all(pidx >= 0)
    assert np.array_equal(ball.norms[pidx], ball.norms[1:] - 1)
    sizes = [len(C.grow_ball(H, r)) for r in range(9)]
    assert all(b > a for a, b in zip(sizes, sizes[1:]))


def test_growth_degree_sanity_bound():
    for spec in (Z2, H):
        D = spec.growth_degree
        k = max(len(C.grow_ball(spec, 2)) / 2 ** D, 2 ** D / len(C.grow_ball(spec, 2)))
        for R in (4, 8, 16):
            n = len(C.grow_ball(spec, R))
            assert R ** D / (4 * k) <= n <= 4 * k * R ** D


def test_restricted_ball_and_cache():
    C.clear_cache()
    big = C.grow_ball(H, 10)
    small = C.grow_ball(H, 6)
    assert len(small) == big.offsets[7]
    assert small.index_of((0, 0, 1)) >= 0
    assert small.index_of((7, 0, 0)) == -1


def test_memory_budget():
    C.clear_cache()
    with pytest.raises(MemoryBudgetExceeded):
        C.grow_ball(H, 20, max_elements=1000)
    C.clear_cache()


def test_ab_norm_examples():
    assert C.ab_norm(H, (3, -2, 17)) == 5
    assert C.ab_norm(H, H.identity) == 0
    assert C.ab_norm(H, (0, 0, 5)) == 0
    # cross-check against an explicit coset search at small radius
    ball = C.grow_ball(H, 7)
    in_coset = (ball.coords[:, 0] == 3) & (ball.coords[:, 1] == -2)
    assert ball.norms[in_coset].min() == 5
    with pytest.raises(UnsupportedKind):
        C.ab_norm(G.dihedral(1), (1, 0))


def test_geodesics_replay():
    ball = C.grow_ball(H, 9)
    rng = np.random.default_rng(0)
    for i in rng.choice(len(ball), 1000, replace=False):
        x = tuple(int(v) for v in ball.coords[i])
        w = C.geodesic(H, ball, x)
        assert len(w) == ball.norms[i]
        assert C.replay(H, w) == x
    assert C.geodesic(H, ball, H.identity) == []
    w = C.geodesic(H, ball, (0, 0, 1))
    assert len(w) == 4 and C.replay(H, w) == (0, 0, 1)
    with pytest.raises(NotInBall):
        C.geodesic(H, ball, (50, 0, 0))


pts = st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-6, 6))


@given(pts, pts)
def test_metric_symmetry(x, y):
    a = C.word_norm(H, G.multiply(H, y, G.inverse(H, x)))
    b = C.word_norm(H, G.multiply(H, x, G.inverse(H, y)))
    assert a == b


@given(pts, pts, pts)
def test_triangle_inequality(x, y, z):
    d = lambda a, b: C.word_norm(H, G.multiply(H, b, G.inverse(H, a)))  # noqa: E731
    assert d(x, z) <= d(x, y) + d(y, z)


def test_word_norm_agrees_with_ball_beyond_half_cap():
    ball = C.grow_ball(H, 10)
    rng = np.random.default_rng(1)
    for i in rng.choice(len(ball), 300, replace=False):
        assert C.word_norm(H, tuple(ball.coords[i]), cap=10) == ball.norms[i]


def test_edge_keys_are_symmetric():
    x = (2, -1, 3)
    for k, s in enumerate(H.generators):
        sx = G.multiply(H, s, x)
        kinv = H.inverse_generator[k]
        assert C.EdgeKey.of(H, x, k) == C.EdgeKey.of(H, sx, kinv)
    classes = H.direction_classes
    assert classes[0] == classes[1] != classes[2] == classes[3]


def test_dump_csv(tmp_path):
    p = tmp_path / "b.csv"
    C.grow_ball(Z2, 2).dump_csv(p)
    lines = p.read_text().splitlines()
    assert lines[0] == "kind,c0,c1,word_norm"
    assert len(lines) == 14
