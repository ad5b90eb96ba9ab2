"""Monte Carlo estimators for the limiting norm and the growth hypotheses.

Sample ``m`` of a task always uses the environment seeded by
``derive_seed(master_seed, m)``, for every rung of a ladder.  Rungs are
therefore paired (common random numbers) and rung differences get paired
standard errors.  Samples are evaluated through :func:`ordered_map`, so results
do not depend on the worker count.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from typing import Optional, Sequence

import numpy as np

from . import groups as G
from .cayley import ab_norm, grow_ball, word_norm
from .errors import TruncationUncertain, UnsupportedKind, UnsupportedVariant
from .groups import GroupSpec
from .models import (Environment, Frog, Model, c_double_prime, cocycle_shifted, evaluate_many, is_fpp,
                     passage_times)
from .parallel import ordered_map
from .prf import derive_seed

Z95 = 1.6448536269514722  # one-sided 95% normal quantile


def sample_env(master_seed: int, m: int) -> Environment:
    return Environment(derive_seed(master_seed, m))


def sample_sphere(spec: GroupSpec, r: int, master_seed: int, m: int) -> G.Element:
    """A uniformly chosen element of the sphere of radius ``r`` (keyed by ``m``)."""
    sph = grow_ball(spec, r).sphere(r)
    i = derive_seed(master_seed, 1_000_003, r, m) % len(sph)
    return tuple(int(v) for v in sph[i])


def _mean_se(v: np.ndarray) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    if len(v) < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(len(v)))


def _jsonable(obj):
    if is_dataclass(obj):
        return _jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def to_json(report) -> str:
    """Stable JSON text for any report dataclass."""
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# ladder sampling


def _ladder_task(args) -> list[float]:
    model, spec, targets, seed, margin = args
    env = Environment(seed)
    return [s.value for s in evaluate_many(model, env, spec, targets, margin)]


def sample_ladder(model: Model, spec: GroupSpec, x, ladder: Sequence[int], M: int, master_seed: int = 0,
                  margin: float = 3.0, workers: int = 1) -> np.ndarray:
    """``values[m, k] = c(x^{n_k})`` in environment ``m``; shape ``(M, len(ladder))``."""
    targets = [G.power(spec, x, n) for n in ladder]
    tasks = [(model, spec, targets, sample_env(master_seed, m).master_seed, margin) for m in range(M)]
    return np.array(ordered_map(_ladder_task, tasks, workers), dtype=float).reshape(M, len(ladder))


@dataclass
class Rung:
    n: int
    mean: float
    std_error: float
    samples: int
    running_min: float
    violation: bool = False


@dataclass
class PhiEstimate:
    x: tuple
    direction: tuple
    ladder: list[Rung]
    phi_hat: float
    monotone_violations: int
    extrapolations: dict = field(default_factory=dict)
    master_seed: int = 0
    model: str = ""

    @property
    def std_error(self) -> float:
        return self.ladder[-1].std_error


def _extrapolate(ns: np.ndarray, means: np.ndarray) -> dict:
    """Least-squares fits ``mean ~ phi + b/n`` and ``mean ~ phi + b/sqrt(n)``; informational only."""
    out = {}
    if len(ns) >= 2:
        for name, f in (("inv_n", 1.0 / ns), ("inv_sqrt_n", 1.0 / np.sqrt(ns))):
            A = np.stack([np.ones_like(f), f], axis=1)
            coef, *_ = np.linalg.lstsq(A, means, rcond=None)
            out[name] = {"phi": float(coef[0]), "slope": float(coef[1])}
    return out


def phi_from_values(x, direction, ladder, values: np.ndarray, master_seed: int = 0, model: str = "",
                    tolerance: float = 2.0) -> PhiEstimate:
    """Build a :class:`PhiEstimate` from a paired value matrix ``(M, rungs)``.

    A rung is a violation when its mean exceeds the running minimum of the
    earlier rungs by more than ``tolerance`` paired standard errors of the
    difference.
    """
    ns = np.asarray(ladder, dtype=float)
    r = values / ns[None, :]
    rungs: list[Rung] = []
    best_k = None
    violations = 0
    for k, n in enumerate(ladder):
        mean, se = _mean_se(r[:, k])
        viol = False
        if best_k is not None:
            d_mean, d_se = _mean_se(r[:, k] - r[:, best_k])
            viol = bool(d_mean > tolerance * d_se + 1e-12)
            violations += int(viol)
        if best_k is None or mean < rungs[best_k].mean:
            best_k = k
        run_min = mean if best_k == k else rungs[best_k].mean
        rungs.append(Rung(int(n), mean, se, int(r.shape[0]), run_min, viol))
    means = np.array([g.mean for g in rungs])
    return PhiEstimate(tuple(x), tuple(direction), rungs, rungs[-1].mean, violations,
                       _extrapolate(ns, means), master_seed, model)


def estimate_phi(model: Model, spec: GroupSpec, x, ladder: Sequence[int], M: int, master_seed: int = 0,
                 margin: float = 3.0, workers: int = 1) -> PhiEstimate:
    """Ladder of ``mean c(x^n) / n``; ``phi_hat`` is the largest rung's mean."""
    x = G.validate(spec, x)
    if x == spec.identity:
        raise ValueError("x must not be the identity")
    ladder = [int(n) for n in ladder]
    if any(b <= a for a, b in zip(ladder, ladder[1:])) or ladder[0] < 1:
        raise ValueError("ladder must be strictly increasing positive integers")
    values = sample_ladder(model, spec, x, ladder, M, master_seed, margin, workers)
    return phi_from_values(x, G.abelianize(spec, x), ladder, values, master_seed, model.name)


# ---------------------------------------------------------------------------
# condition (i): tails


@dataclass
class RadiusTail:
    radius: int
    samples: int
    t_grid: list
    survival: list
    exceedances: int
    status: str  # fitted | no_exceedances | insufficient_tail
    tail_exponent: Optional[float]
    quadratic_coef: Optional[float]
    concave: Optional[bool]
    decreasing: bool
    passed: Optional[bool]


@dataclass
class ConditionReport:
    condition: str
    parameters: dict
    results: list
    passed: Optional[bool]
    notes: str = ""


def _ratio_task(args) -> float:
    model, spec, x, seed, margin = args
    s = evaluate_many(model, Environment(seed), spec, [x], margin)[0]
    n = word_norm(spec, x, 256)
    return s.value / n


def tail_survival(ratios: np.ndarray, beta: float, points: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Empirical ``P(ratio >= t)`` on ``points`` equally spaced ``t`` from ``beta`` to the sample max."""
    hi = max(float(np.max(ratios)), beta)
    t = np.linspace(beta, hi, points) if hi > beta else np.array([beta])
    s = np.array([(ratios >= ti).mean() for ti in t])
    return t, s


def fit_tail(t: np.ndarray, s: np.ndarray, required: float) -> dict:
    """Tail diagnostics on the grid points with ``0 < S(t) <= 1/2``.

    ``tail_exponent`` is minus the slope of ``log S`` against ``log t``;
    ``quadratic_coef`` the leading coefficient of a quadratic fit of ``log S``
    against ``t`` (concave when it is not positive).
    """
    mask = (s > 0) & (s <= 0.5)
    out = dict(tail_exponent=None, quadratic_coef=None, concave=None)
    pos = s > 0
    out["decreasing"] = bool(np.all(np.diff(s[pos]) <= 0))
    if mask.sum() < 3:
        out["status"] = "insufficient_tail"
        out["passed"] = None
        return out
    lt, ls = np.log(t[mask]), np.log(s[mask])
    slope = np.polyfit(lt, ls, 1)[0]
    quad = np.polyfit(t[mask], ls, 2)[0]
    out.update(tail_exponent=float(-slope), quadratic_coef=float(quad), concave=bool(quad <= 0),
               status="fitted")
    out["passed"] = bool(-slope >= required and out["concave"] and out["decreasing"])
    return out


def check_condition_all(model: Model, spec: GroupSpec, sample_radii: Sequence[int], beta: float, M: int,
                        master_seed: int = 0, margin: float = 3.0, workers: int = 1,
                        grid_points: int = 12) -> ConditionReport:
    """Tail of ``c(x) / |x|`` above ``beta`` for random ``x`` on each sphere.

    A radius passes when the fitted log-log tail exponent is at least
    ``2D + 1``, the log-survival is decreasing and concave, or when no sample
    exceeds ``beta`` at all (reported as ``no_exceedances``).  Too few tail
    points to fit leave the radius undetermined (``insufficient_tail``).
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    required = 2 * spec.growth_degree + 1
    results = []
    for r in sample_radii:
        tasks = [(model, spec, sample_sphere(spec, r, master_seed, m), sample_env(master_seed, m).master_seed,
                  margin) for m in range(M)]
        ratios = np.array(ordered_map(_ratio_task, tasks, workers))
        exceed = int((ratios >= beta).sum())
        if exceed == 0:
            results.append(RadiusTail(int(r), M, [beta], [0.0], 0, "no_exceedances", None, None, None, True, True))
            continue
        t, s = tail_survival(ratios, beta, grid_points)
        fit = fit_tail(t, s, required)
        results.append(RadiusTail(int(r), M, t.tolist(), s.tolist(), exceed, fit["status"], fit["tail_exponent"],
                                  fit["quadratic_coef"], fit["concave"], fit["decreasing"], fit["passed"]))
    verdicts = [res.passed for res in results]
    passed = None if any(v is None for v in verdicts) else all(verdicts)
    return ConditionReport("(i)", dict(beta=beta, M=M, radii=list(sample_radii), required_exponent=required,
                                        master_seed=master_seed, margin=margin), results, passed)


# ---------------------------------------------------------------------------
# condition (ii) / (ii')


@dataclass
class AmlRung:
    n: int
    mean: float
    std_error: float
    lower95: float
    ab_norm: Optional[int]
    word_norm: int
    a_ab: Optional[float]
    a_word: float
    pathwise_min_ratio: float


def check_condition_aml(model: Model, spec: GroupSpec, x, ladder: Sequence[int], M: int, master_seed: int = 0,
                        margin: float = 3.0, workers: int = 1) -> ConditionReport:
    """Largest ``a`` with ``a |x^n| <= E c(x^n)`` at 95% one-sided confidence.

    ``a_ab`` uses the abelianised norm (condition (ii)); rungs where it is zero
    carry no constraint.  ``a_word`` uses the word norm (condition (ii')).
    ``pathwise_a_word`` is the smallest ratio ``c(x^n) / |x^n|`` seen in any
    single sample, a certificate for deterministic lower bounds.
    """
    x = G.validate(spec, x)
    ladder = [int(n) for n in ladder]
    values = sample_ladder(model, spec, x, ladder, M, master_seed, margin, workers)
    nilpotent = spec.kind in G.NILPOTENT_KINDS
    rungs = []
    for k, n in enumerate(ladder):
        xn = G.power(spec, x, n)
        mean, se = _mean_se(values[:, k])
        lo = mean - Z95 * se
        ab = ab_norm(spec, xn) if nilpotent else None
        wn = word_norm(spec, xn, 4 * n * max(1, max(abs(c) for c in x)) + 8)
        rungs.append(AmlRung(n, mean, se, lo, ab, wn, (lo / ab) if ab else None, lo / wn,
                             float(values[:, k].min() / wn)))
    a_ab_vals = [r.a_ab for r in rungs if r.a_ab is not None]
    a_ab = min(a_ab_vals) if a_ab_vals else None
    a_word = min(r.a_word for r in rungs)
    sub_ab = [r.n for r in rungs if r.a_ab is not None and r.a_ab > 0]
    sub_word = [r.n for r in rungs if r.a_word > 0]
    params = dict(x=list(x), ladder=ladder, M=M, master_seed=master_seed, margin=margin)
    summary = dict(a_ab=a_ab, a_word=a_word, pathwise_a_word=min(r.pathwise_min_ratio for r in rungs),
                   passing_subladder_ab=sub_ab, passing_subladder_word=sub_word)
    passed = (a_ab is not None and a_ab > 0) or a_word > 0
    return ConditionReport("(ii)", params, [summary] + rungs, passed)


# ---------------------------------------------------------------------------
# condition (iii): innerness witness


@dataclass
class InnernessWitness:
    x: tuple
    seed: int
    steps: list
    step_values: list
    total: float
    value: float
    equal: bool


def _check_structure(spec: GroupSpec) -> None:
    if spec.kind not in G.NILPOTENT_KINDS:
        raise UnsupportedKind("the innerness witness is implemented for nilpotent kinds")
    zero = G.abelianize(spec, spec.identity)
    for s in spec.generators:
        if G.abelianize(spec, s) == zero:
            raise UnsupportedKind(f"generator {s} lies in the commutator subgroup")


def check_innerness_fpp(model: Model, env: Environment, spec: GroupSpec, x, margin: float = 3.0) -> InnernessWitness:
    """Exact (epsilon = 0) decomposition of ``c(x)`` along an optimal path.

    The path ``e = w_0, w_1, ..., w_n = x`` comes from the Dijkstra tree;
    ``z_i = w_i w_{i-1}^{-1}`` is a generator and the witness checks that the
    shifted values ``c(z_i)`` at base ``w_{i-1}`` sum to ``c(x)``.
    """
    if isinstance(model, Frog) or not is_fpp(model):
        raise UnsupportedVariant("innerness is only checked for FPP variants")
    _check_structure(spec)
    x = G.validate(spec, x)
    n = word_norm(spec, x, 256)
    R = max(1, math.ceil(margin * n))
    f = passage_times(model, env, spec, R)
    value = f.value(x)
    if f.touched(value):
        raise TruncationUncertain(f"boundary touched for x={x} at radius {R}")
    rows = f.path(x)
    pts = [tuple(int(c) for c in f.ball.coords[i]) for i in rows]
    steps, vals = [], []
    total = 0.0
    for prev, cur in zip(pts, pts[1:]):
        z = G.multiply(spec, cur, G.inverse(spec, prev))
        v = cocycle_shifted(model, env, spec, z, prev, margin).value
        steps.append(z)
        vals.append(v)
        total += v
    return InnernessWitness(x, env.master_seed, steps, vals, total, value, total == value)


# ---------------------------------------------------------------------------
# polygonal ergodic limits


def _polygon_task(args) -> list[list[float]]:
    model, spec, y_list, ladder, seed, margin = args
    env = Environment(seed)
    out = []
    for n in ladder:
        base = spec.identity
        row = []
        for y in y_list:
            yn = G.power(spec, y, n)
            shifted = cocycle_shifted(model, env, spec, yn, base, margin).value
            plain = cocycle_shifted(model, env, spec, yn, None, margin).value
            row.append((shifted, plain))
            base = G.multiply(spec, yn, base)
        out.append(row)
    return out


@dataclass
class PolygonalReport:
    y_list: list
    ladder: list
    shifted_means: list  # [rung][j]
    plain_means: list
    gaps: list
    gap_std_errors: list
    max_gap: list  # per rung
    M: int
    master_seed: int


def polygonal_ergodic_check(model: Model, spec: GroupSpec, y_list, ladder: Sequence[int], M: int,
                            master_seed: int = 0, margin: float = 3.0, workers: int = 1) -> PolygonalReport:
    """Compare ``c(y_j^n)/n`` at the polygonal base ``y_{j-1}^n ... y_1^n`` with the unshifted ladder."""
    y_list = [G.validate(spec, y) for y in y_list]
    ladder = [int(n) for n in ladder]
    tasks = [(model, spec, y_list, ladder, sample_env(master_seed, m).master_seed, margin) for m in range(M)]
    arr = np.array(ordered_map(_polygon_task, tasks, workers), dtype=float)  # (M, rungs, J, 2)
    arr = arr / np.asarray(ladder, dtype=float)[None, :, None, None]
    shifted = arr[..., 0].mean(axis=0)
    plain = arr[..., 1].mean(axis=0)
    diff = arr[..., 0] - arr[..., 1]
    gaps = diff.mean(axis=0)
    se = diff.std(axis=0, ddof=1) / math.sqrt(M) if M > 1 else np.zeros_like(gaps)
    return PolygonalReport([list(y) for y in y_list], ladder, shifted.tolist(), plain.tolist(), gaps.tolist(),
                           se.tolist(), np.abs(gaps).max(axis=1).tolist(), M, master_seed)


# ---------------------------------------------------------------------------
# c versus c''


def _cdp_task(args) -> tuple[float, float]:
    model, spec, x, seed, margin = args
    env = Environment(seed)
    c = evaluate_many(model, env, spec, [x], margin)[0].value
    return c, c_double_prime(model, env, spec, x, margin).value


def max_representative_norm(spec: GroupSpec) -> int:
    zs = [G.multiply(spec, z, t) for z in G.coset_representatives(spec) for t in G.torsion_subgroup(spec)]
    return max(word_norm(spec, z, 256) for z in zs)


@dataclass
class CompareRadius:
    radius: int
    samples: int
    median_ratio: float
    max_ratio: float
    bound: float


@dataclass
class CompareReport:
    radii: list
    results: list
    max_representative_norm: int
    master_seed: int


def compare_c_cprime(model: Model, spec: GroupSpec, radii: Sequence[int], M: int, master_seed: int = 0,
                     margin: float = 3.0, workers: int = 1) -> CompareReport:
    """``|c(x) - c''([[x]])| / |x|`` for random ``x`` on each sphere."""
    zmax = max_representative_norm(spec)
    results = []
    for r in radii:
        tasks = [(model, spec, sample_sphere(spec, r, master_seed, m), sample_env(master_seed, m).master_seed,
                  margin) for m in range(M)]
        vals = np.array(ordered_map(_cdp_task, tasks, workers), dtype=float)
        ratio = np.abs(vals[:, 0] - vals[:, 1]) / r
        results.append(CompareRadius(int(r), M, float(np.median(ratio)), float(ratio.max()), 2.0 * zmax / r))
    return CompareReport(list(radii), results, zmax, master_seed)
