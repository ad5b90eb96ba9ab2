from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conegrowth import cayley as C
from conegrowth import estimators as E
from conegrowth import groups as G
from conegrowth import models as M
from conegrowth.errors import TruncationUncertain, UnsupportedKind, UnsupportedVariant
from conegrowth.finite import cyclic_table

H = G.heisenberg()
Z2 = G.free_abelian(2)
ONE = M.IidFpp(M.Constant(1.0))
FIVE = M.ColoringFpp((0.2,) * 5)
UNI = M.IidFpp(M.Uniform(0.5, 2.0))


def test_phi_constant_weight_examples():
    est = E.estimate_phi(ONE, Z2, (1, 0), [1, 2, 4, 8], 3)
    assert est.phi_hat == 1.0 and est.monotone_violations == 0 and est.std_error == 0
    assert E.estimate_phi(ONE, H, (1, 1, 0), [4, 8, 16], 2).phi_hat == 2.0


def test_central_direction_grows_like_sqrt_n():
    est = E.estimate_phi(ONE, H, (0, 0, 1), [4, 16, 64, 256], 1)
    scaled = [r.mean * math.sqrt(r.n) for r in est.ladder]
    assert max(scaled) < 10 and min(scaled) > 1
    assert est.phi_hat < 0.5


def test_estimate_phi_validation():
    with pytest.raises(ValueError):
        E.estimate_phi(ONE, Z2, (0, 0), [1, 2], 1)
    with pytest.raises(ValueError):
        E.estimate_phi(ONE, Z2, (1, 0), [2, 2], 1)


def test_phi_from_values_flags_increase():
    rng = np.random.default_rng(0)
    base = rng.normal(10.0, 0.1, size=(50, 1))
    vals = np.concatenate([base * 1, base * 2 * 1.2], axis=1)  # rung 2 mean 12 > rung 1 mean 10
    est = E.phi_from_values((1, 0), (1, 0), [1, 2], vals)
    assert est.monotone_violations == 1 and est.ladder[1].violation
    ok = E.phi_from_values((1, 0), (1, 0), [1, 2], np.concatenate([base, base * 2 * 0.9], axis=1))
    assert ok.monotone_violations == 0 and ok.ladder[1].running_min == ok.ladder[1].mean
    assert set(ok.extrapolations) == {"inv_n", "inv_sqrt_n"}


def test_homogeneity_under_common_random_numbers():
    x = (1, 2)
    x2 = G.power(Z2, x, 2)
    a = E.sample_ladder(FIVE, Z2, x2, [3, 5], 6, master_seed=4)
    b = E.sample_ladder(FIVE, Z2, x, [6, 10], 6, master_seed=4)
    assert np.array_equal(a, b)


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.tuples(st.integers(-4, 4), st.integers(-4, 4)),
       st.tuples(st.integers(-4, 4), st.integers(-4, 4)))
def test_cocycle_subadditive_pathwise(seed, x, y):
    env = M.Environment(seed)
    xy = G.multiply(Z2, y, x)
    cx = M.cocycle_shifted(FIVE, env, Z2, x).value
    cy = M.cocycle_shifted(FIVE, env, Z2, y, base=x).value
    assert M.cocycle_shifted(FIVE, env, Z2, xy).value <= cx + cy + 1e-12


@settings(max_examples=15)
@given(st.integers(0, 10**6), st.tuples(st.integers(-3, 3), st.integers(-3, 3), st.integers(-6, 6)))
def test_bilipschitz_sandwich(seed, x):
    n = C.word_norm(H, x, 64)
    v = M.cocycle_shifted(UNI, M.Environment(seed), H, x).value
    assert 0.5 * n - 1e-12 <= v <= 2.0 * n + 1e-12


def test_fekete_consistency_of_direction_means():
    """Subadditive means: the ladder of c(x^n)/n drifts down, never up, beyond noise."""
    est = E.estimate_phi(FIVE, Z2, (1, 0), [2, 4, 8, 16], 40, master_seed=2)
    assert est.monotone_violations == 0
    assert est.ladder[-1].mean <= est.ladder[0].mean
    # directional means are subadditive too: phi(x + y) <= phi(x) + phi(y)
    ex = E.estimate_phi(FIVE, Z2, (1, 0), [16], 40, master_seed=3).phi_hat
    ey = E.estimate_phi(FIVE, Z2, (0, 1), [16], 40, master_seed=3).phi_hat
    exy = E.estimate_phi(FIVE, Z2, (1, 1), [16], 40, master_seed=3).phi_hat
    assert exy <= ex + ey


def test_condition_all_constant_and_trivial():
    rep = E.check_condition_all(ONE, Z2, [4, 8], 1.5, 20)
    assert rep.passed and all(r.status == "no_exceedances" for r in rep.results)
    assert rep.parameters["required_exponent"] == 5
    rep = E.check_condition_all(FIVE, Z2, [6], 1.01, 20)
    assert rep.passed and rep.results[0].exceedances == 0


def test_condition_all_fits_exponential_tail():
    rep = E.check_condition_all(M.RichardsonEnv(M.Constant(1.0)), Z2, [6], 0.3, 200, master_seed=1)
    r = rep.results[0]
    assert r.status in ("fitted", "insufficient_tail")
    assert r.decreasing
    if r.status == "fitted":
        assert r.tail_exponent > 0


def test_fit_tail_statuses():
    t = np.linspace(1, 3, 12)
    assert E.fit_tail(t, np.full(12, 0.9), 5)["status"] == "insufficient_tail"
    s = np.exp(-4 * t ** 2) / np.exp(-4)  # Gaussian tail: concave in log, steep
    s = np.minimum(s, 0.5)
    fit = E.fit_tail(t, s, 5)
    assert fit["status"] == "fitted" and fit["concave"] and fit["tail_exponent"] > 5 and fit["passed"]
    heavy = 0.5 * t ** -1.0
    fit = E.fit_tail(t, heavy, 5)
    assert fit["tail_exponent"] == pytest.approx(1.0) and not fit["passed"]


def test_condition_aml_constant():
    rep = E.check_condition_aml(ONE, Z2, (1, 1), [1, 2, 4], 3)
    s = rep.results[0]
    assert rep.passed and s["a_ab"] == pytest.approx(1.0) and s["a_word"] == pytest.approx(1.0)
    assert s["passing_subladder_ab"] == [1, 2, 4]


def test_condition_aml_central_direction_has_no_abelian_constraint():
    rep = E.check_condition_aml(ONE, H, (0, 0, 1), [1, 4], 2)
    s = rep.results[0]
    assert s["a_ab"] is None and s["passing_subladder_ab"] == []
    assert s["a_word"] == pytest.approx(1.0)


def test_condition_aml_frog_pathwise():
    rep = E.check_condition_aml(M.Frog(), Z2, (1, 0), [2, 4], 20)
    assert rep.results[0]["pathwise_a_word"] >= 1.0


def test_condition_aml_coloring_reports_rungs():
    rep = E.check_condition_aml(FIVE, Z2, (1, 0), [2, 4, 8], 30)
    rungs = rep.results[1:]
    assert [r.n for r in rungs] == [2, 4, 8]
    assert all(r.lower95 <= r.mean for r in rungs)
    assert all(0 < r.a_word <= 1 for r in rungs)


def test_innerness_exact_decomposition():
    for seed in range(20):
        try:
            w = E.check_innerness_fpp(FIVE, M.Environment(seed), H, (2, -1, 3))
        except TruncationUncertain:
            continue
        assert w.equal and w.total == w.value
        assert all(z in H.generators or z in H.inverse_generators for z in w.steps)
    w = E.check_innerness_fpp(ONE, M.Environment(0), Z2, (3, 4))
    assert w.value == 7 and w.step_values == [1.0] * 7


def test_innerness_preconditions():
    bad = G.heisenberg([(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)])
    with pytest.raises(UnsupportedKind):
        E.check_innerness_fpp(ONE, M.Environment(0), bad, (1, 1, 0))
    with pytest.raises(UnsupportedVariant):
        E.check_innerness_fpp(M.Frog(), M.Environment(0), Z2, (1, 0))
    with pytest.raises(UnsupportedKind):
        E.check_innerness_fpp(ONE, M.Environment(0), G.dihedral(2), (1, 0, 0))


def test_polygonal_constant_and_single():
    rep = E.polygonal_ergodic_check(ONE, Z2, [(1, 0), (0, 1)], [2, 4], 2)
    assert np.allclose(rep.gaps, 0) and rep.max_gap == [0.0, 0.0]
    rep = E.polygonal_ergodic_check(FIVE, Z2, [(1, 1)], [2, 4], 5, master_seed=9)
    est = E.estimate_phi(FIVE, Z2, (1, 1), [2, 4], 5, master_seed=9)
    assert np.allclose([row[0] for row in rep.shifted_means], [r.mean for r in est.ladder])
    assert np.allclose(rep.gaps, 0)


def test_compare_torsion_free_is_zero():
    rep = E.compare_c_cprime(FIVE, Z2, [3], 5)
    assert rep.max_representative_norm == 0
    assert rep.results[0].max_ratio == 0


def test_compare_with_torsion_within_bound():
    P = G.direct_product_finite(Z2, cyclic_table(3), [1, 2])
    rep = E.compare_c_cprime(FIVE, P, [6], 8, master_seed=2)
    r = rep.results[0]
    assert r.max_ratio <= r.bound


def test_to_json_stable_and_finite():
    rep = E.check_condition_all(ONE, Z2, [4], 1.5, 5)
    a, b = E.to_json(rep), E.to_json(rep)
    assert a == b
    d = json.loads(a)
    assert d["condition"] == "(i)" and d["results"][0]["status"] == "no_exceedances"
    assert json.loads(E.to_json({"v": float("inf"), "w": np.float64(2.0)})) == {"v": None, "w": 2.0}


def test_sample_sphere_on_sphere():
    for m in range(10):
        x = E.sample_sphere(H, 3, 7, m)
        assert C.word_norm(H, x, 64) == 3
    assert E.sample_sphere(H, 3, 7, 4) == E.sample_sphere(H, 3, 7, 4)
