"""Random environments and cocycle evaluation.

An environment is just a master seed.  Edge weights, vertex colours, class
rates and frog steps are keyed hashes of that seed and the coordinates
involved, so nothing is ever materialised globally and every query is
reproducible.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from . import groups as G
from .cayley import Ball, canonical_edges, grow_ball, word_norm
from .errors import TargetOutsideBall, UnsupportedKind, UnsupportedVariant
from .groups import GroupSpec
from .prf import TAG_COLOR, TAG_EDGE, TAG_FROG, TAG_RATE, hash_rows, uniform01


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Constant:
    value: float = 1.0

    def from_uniform(self, u):
        return np.full(np.shape(u), float(self.value))

    @property
    def mean(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class Bernoulli:
    """``hi`` with probability ``p``, otherwise ``lo``."""

    p: float
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    def from_uniform(self, u):
        return np.where(np.asarray(u) < self.p, float(self.hi), float(self.lo))

    @property
    def mean(self) -> float:
        return self.p * self.hi + (1 - self.p) * self.lo


@dataclass(frozen=True)
class Exponential:
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    def from_uniform(self, u):
        return -np.log1p(-np.asarray(u, dtype=float)) / self.rate

    @property
    def mean(self) -> float:
        return 1.0 / self.rate


@dataclass(frozen=True)
class Uniform:
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.hi >= self.lo:
            raise ValueError("need lo <= hi")

    def from_uniform(self, u):
        return self.lo + (self.hi - self.lo) * np.asarray(u, dtype=float)

    @property
    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)


Distribution = Union[Constant, Bernoulli, Exponential, Uniform]
DISTRIBUTIONS = {"constant": Constant, "bernoulli": Bernoulli, "exponential": Exponential, "uniform": Uniform}


def dist_to_dict(d: Distribution) -> dict:
    name = {v: k for k, v in DISTRIBUTIONS.items()}[type(d)]
    return {"dist": name, **asdict(d)}


def dist_from_dict(d: dict) -> Distribution:
    d = dict(d)
    name = d.pop("dist")
    return DISTRIBUTIONS[name](**d)


# ---------------------------------------------------------------------------
# model variants


@dataclass(frozen=True)
class IidFpp:
    weight: Distribution

    name = "iid"


@dataclass(frozen=True)
class ColoringFpp:
    """Vertices get i.i.d. colours; an edge costs 1 iff its endpoints differ."""

    palette: tuple[float, ...]

    name = "coloring"

    def __post_init__(self):
        p = tuple(float(v) for v in self.palette)
        object.__setattr__(self, "palette", p)
        if not p or any(not 0.0 <= v <= 1.0 for v in p):
            raise ValueError("palette probabilities must lie in [0, 1]")
        if abs(sum(p) - 1.0) > 1e-12:
            raise ValueError("palette must sum to 1")

    @property
    def p_max(self) -> float:
        return max(self.palette)


@dataclass(frozen=True)
class RichardsonEnv:
    """Exponential passage times with rates drawn per direction class.

    With ``shared_rates`` (the default) each direction class gets one rate per
    environment; otherwise every edge draws its own rate from ``rate``.
    """

    rate: Distribution
    shared_rates: bool = True

    name = "richardson"


@dataclass(frozen=True)
class Frog:
    walk_step_cap: int = 10_000

    name = "frog"


Model = Union[IidFpp, ColoringFpp, RichardsonEnv, Frog]
FPP_VARIANTS = (IidFpp, ColoringFpp, RichardsonEnv)


def model_to_dict(model: Model) -> dict:
    if isinstance(model, IidFpp):
        return {"variant": "iid", "weight": dist_to_dict(model.weight)}
    if isinstance(model, ColoringFpp):
        return {"variant": "coloring", "palette": list(model.palette)}
    if isinstance(model, RichardsonEnv):
        return {"variant": "richardson", "rate": dist_to_dict(model.rate), "shared_rates": model.shared_rates}
    return {"variant": "frog", "walk_step_cap": model.walk_step_cap}


def model_from_dict(d: dict) -> Model:
    v = d["variant"]
    if v == "iid":
        return IidFpp(dist_from_dict(d["weight"]))
    if v == "coloring":
        return ColoringFpp(tuple(d["palette"]))
    if v == "richardson":
        return RichardsonEnv(dist_from_dict(d["rate"]), bool(d.get("shared_rates", True)))
    if v == "frog":
        return Frog(int(d.get("walk_step_cap", 10_000)))
    raise ValueError(f"unknown model variant {v!r}")


def params_hash(model: Model) -> str:
    blob = json.dumps(model_to_dict(model), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def is_fpp(model: Model) -> bool:
    return isinstance(model, FPP_VARIANTS)


def constant_weight(model: Model) -> Optional[float]:
    """The common edge weight if the model is deterministic, else ``None``."""
    if isinstance(model, IidFpp) and isinstance(model.weight, Constant):
        return float(model.weight.value)
    if isinstance(model, ColoringFpp) and max(model.palette) == 1.0:
        return 0.0
    return None


@dataclass(frozen=True)
class Environment:
    master_seed: int

    def __post_init__(self):
        object.__setattr__(self, "master_seed", int(self.master_seed) & ((1 << 64) - 1))


# ---------------------------------------------------------------------------
# weights


def vertex_colors(model: ColoringFpp, env: Environment, coords: np.ndarray) -> np.ndarray:
    u = uniform01(hash_rows(env.master_seed, TAG_COLOR, coords))
    cum = np.cumsum(model.palette)
    return np.minimum(np.searchsorted(cum, u, side="right"), len(model.palette) - 1)


def class_rates(model: RichardsonEnv, env: Environment, n_classes: int) -> np.ndarray:
    u = uniform01(hash_rows(env.master_seed, TAG_RATE, np.arange(n_classes, dtype=np.int64)))
    return model.rate.from_uniform(u)


def edge_weights(model: Model, env: Environment, spec: GroupSpec,
                 a: np.ndarray, b: np.ndarray, classes: np.ndarray) -> np.ndarray:
    """Weights of the edges ``{a_i, b_i}`` with direction classes ``classes_i``.

    Symmetric in the endpoints: keys are canonicalised before hashing.
    """
    if not is_fpp(model):
        raise UnsupportedVariant("the frog model has no edge weights")
    a = np.asarray(a, dtype=np.int64).reshape(-1, spec.ncoords)
    b = np.asarray(b, dtype=np.int64).reshape(-1, spec.ncoords)
    classes = np.asarray(classes, dtype=np.int64).reshape(-1)
    if isinstance(model, ColoringFpp):
        if len(model.palette) == 1:
            return np.zeros(len(a))
        return (vertex_colors(model, env, a) != vertex_colors(model, env, b)).astype(float)
    lo, hi = canonical_edges(a, b)
    u = uniform01(hash_rows(env.master_seed, TAG_EDGE, np.concatenate([lo, hi, classes[:, None]], axis=1)))
    if isinstance(model, IidFpp):
        return model.weight.from_uniform(u)
    if model.shared_rates:
        lam = class_rates(model, env, spec.n_direction_classes)[classes]
    else:
        key = np.concatenate([lo, hi, classes[:, None]], axis=1)
        lam = model.rate.from_uniform(uniform01(hash_rows(env.master_seed, TAG_RATE, key)))
    return -np.log1p(-u) / lam


def edge_weight(model: Model, env: Environment, spec: GroupSpec, edge) -> float:
    """Weight of a single :class:`~conegrowth.cayley.EdgeKey`."""
    w = edge_weights(model, env, spec, np.array([edge.lo]), np.array([edge.hi]), np.array([edge.direction_class]))
    return float(w[0])


# ---------------------------------------------------------------------------
# first passage


_EDGE_CACHE: dict[tuple[GroupSpec, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _directed_edges(ball: Ball) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    key = (ball.spec, ball.radius)
    hit = _EDGE_CACHE.get(key)
    if hit is None:
        nb = ball.neighbors
        rows, ks = np.nonzero(nb >= 0)
        cols = nb[rows, ks].astype(np.int64)
        if len(_EDGE_CACHE) > 8:
            _EDGE_CACHE.clear()
        hit = _EDGE_CACHE[key] = (rows.astype(np.int64), cols, ks.astype(np.int64))
    return hit


@dataclass
class PassageField:
    """First-passage times from ``base`` to every ``b * base`` with ``b`` in the ball."""

    ball: Ball
    base: G.Element
    dist: np.ndarray
    pred: np.ndarray
    weights: Optional[csr_matrix] = field(default=None, repr=False)

    @property
    def sphere_min(self) -> float:
        s = self.dist[self.ball.offsets[-2]:self.ball.offsets[-1]]
        return float(s.min()) if len(s) else math.inf

    def value(self, x) -> float:
        i = int(self.ball.index_of(x))
        if i < 0:
            raise TargetOutsideBall(f"{tuple(x)} is outside the radius-{self.ball.radius} ball")
        return float(self.dist[i])

    def touched(self, value: float) -> bool:
        """Whether a path leaving the ball could undercut ``value``."""
        return self.sphere_min < value

    def path(self, x) -> list[int]:
        """Ball rows along the shortest-path tree from the base to ``x * base``."""
        i = int(self.ball.index_of(x))
        out = [i]
        while self.pred[i] >= 0:
            i = int(self.pred[i])
            out.append(i)
        return out[::-1]


def passage_times(model: Model, env: Environment, spec: GroupSpec, radius: int,
                  base=None, limit: float = np.inf) -> PassageField:
    """Dijkstra from ``base`` over the translated ball ``B(e, radius) * base``."""
    if not is_fpp(model):
        raise UnsupportedVariant("first passage needs an FPP variant")
    ball = grow_ball(spec, radius)
    base = spec.identity if base is None else G.validate(spec, base)
    rows, cols, ks = _directed_edges(ball)
    pts = ball.coords if base == spec.identity else G.mul_batch(spec, ball.coords, np.asarray(base, dtype=np.int64))
    classes = np.asarray(spec.direction_classes, dtype=np.int64)[ks]
    w = edge_weights(model, env, spec, pts[rows], pts[cols], classes)
    n = len(ball)
    mat = csr_matrix((w, (rows, cols)), shape=(n, n))
    dist, pred = dijkstra(mat, directed=True, indices=0, return_predecessors=True, limit=limit)
    return PassageField(ball, base, dist, pred, mat)


@dataclass
class CocycleSample:
    x: G.Element
    base: G.Element
    value: float
    truncation_radius: int
    boundary_touched: bool
    seed: int
    model: str
    params: str = ""

    CSV_COLUMNS = ("model", "variant_params_hash", "seed", "x_coords", "base_coords",
                   "value", "truncation_radius", "boundary_touched")

    def to_row(self) -> list:
        return [self.model, self.params, self.seed, " ".join(map(str, self.x)), " ".join(map(str, self.base)),
                repr(float(self.value)), self.truncation_radius, int(self.boundary_touched)]


def write_sample_log(path, samples: Iterable[CocycleSample]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CocycleSample.CSV_COLUMNS)
        for s in samples:
            w.writerow(s.to_row())


def _norm_or_raise(spec: GroupSpec, x, cap: int) -> int:
    n = word_norm(spec, x, cap)
    if n is None:
        raise TargetOutsideBall(f"word norm of {tuple(x)} exceeds the cap {cap}")
    return n


def cocycle_shifted(model: Model, env: Environment, spec: GroupSpec, x, base=None,
                    margin: float = 3.0, cap: int = 128) -> CocycleSample:
    """First-passage time from ``base`` to ``x * base``, i.e. ``c(x)`` shifted by ``base``."""
    if not is_fpp(model):
        raise UnsupportedVariant("shifted cocycles are evaluated for FPP variants only")
    if margin < 1:
        raise ValueError("margin must be at least 1")
    x = G.validate(spec, x)
    base = spec.identity if base is None else G.validate(spec, base)
    tag = dict(seed=env.master_seed, model=model.name, params=params_hash(model))
    if x == spec.identity:
        return CocycleSample(x, base, 0.0, 0, False, **tag)
    n = _norm_or_raise(spec, x, cap)
    R = max(1, math.ceil(margin * n))
    w = constant_weight(model)
    if w is not None:
        return CocycleSample(x, base, w * n, R, False, **tag)
    field_ = passage_times(model, env, spec, R, base)
    v = field_.value(x)
    return CocycleSample(x, base, v, R, field_.touched(v), **tag)


def first_passage(model: Model, env: Environment, spec: GroupSpec, x,
                  margin: float = 3.0, cap: int = 128) -> CocycleSample:
    """``c_R(x)``: passage time from the identity restricted to ``B(e, ceil(margin |x|))``.

    ``boundary_touched`` is set when some vertex on the outer sphere is reached
    strictly faster than ``x``; otherwise the restricted value equals the value
    on the whole graph.
    """
    return cocycle_shifted(model, env, spec, x, None, margin, cap)


# ---------------------------------------------------------------------------
# frog model


@dataclass
class FrogRun:
    ball: Ball
    wake: np.ndarray  # activation time per ball row, -1 if still asleep at t_max
    t_max: int
    seed: int

    def time_of(self, x) -> Optional[int]:
        i = int(self.ball.index_of(x))
        if i < 0:
            raise TargetOutsideBall(f"{tuple(x)} is outside the simulation ball")
        t = int(self.wake[i])
        return None if t < 0 else t


def simulate_frogs(model: Frog, env: Environment, spec: GroupSpec, radius: int, t_max: int) -> FrogRun:
    """Discrete-time frog model on ``B(e, radius)`` with frog removal at the boundary.

    Every vertex holds one sleeping frog except the identity, whose frog is
    awake at time 0.  At each step every awake frog jumps to ``s * x`` for a
    uniformly chosen generator ``s``; frogs that leave the ball are removed.
    A sleeping frog wakes at the first time its vertex is visited and starts
    walking at the next step.  The step of the frog born at ``o`` at time ``t``
    is a keyed hash of ``(seed, o, t)``.
    """
    if not isinstance(model, Frog):
        raise UnsupportedVariant("frog simulation needs the Frog variant")
    ball = grow_ball(spec, radius)
    nb = ball.neighbors
    K = nb.shape[1]
    wake = np.full(len(ball), -1, dtype=np.int64)
    wake[0] = 0
    pos = np.array([0], dtype=np.int64)
    origin = np.array([0], dtype=np.int64)
    coords = ball.coords
    for t in range(1, t_max + 1):
        if len(pos) == 0:
            break
        key = np.concatenate([coords[origin], np.full((len(origin), 1), t, dtype=np.int64)], axis=1)
        k = (uniform01(hash_rows(env.master_seed, TAG_FROG, key)) * K).astype(np.int64)
        new = nb[pos, k].astype(np.int64)
        keep = new >= 0
        pos, origin = new[keep], origin[keep]
        asleep = wake[pos] < 0
        if asleep.any():
            woken = np.unique(pos[asleep])
            wake[woken] = t
            pos = np.concatenate([pos, woken])
            origin = np.concatenate([origin, woken])
    return FrogRun(ball, wake, t_max, env.master_seed)


def frog_activation(model: Frog, env: Environment, spec: GroupSpec, targets, radius: int,
                    t_max: int) -> dict:
    """Activation time of each target, ``None`` where undetermined by ``t_max``."""
    run = simulate_frogs(model, env, spec, radius, t_max)
    return {tuple(t): run.time_of(G.validate(spec, t)) for t in targets}


def frog_sample(model: Frog, env: Environment, spec: GroupSpec, x, margin: float = 3.0,
                t_max: Optional[int] = None, cap: int = 128) -> CocycleSample:
    """Activation time of ``x`` packaged as a cocycle sample (``inf`` if undetermined)."""
    x = G.validate(spec, x)
    tag = dict(seed=env.master_seed, model=model.name, params=params_hash(model))
    if x == spec.identity:
        return CocycleSample(x, spec.identity, 0.0, 0, False, **tag)
    n = _norm_or_raise(spec, x, cap)
    R = max(1, math.ceil(margin * n))
    t_max = model.walk_step_cap if t_max is None else t_max
    t = simulate_frogs(model, env, spec, R, t_max).time_of(x)
    return CocycleSample(x, spec.identity, math.inf if t is None else float(t), R, t is None, **tag)


def evaluate(model: Model, env: Environment, spec: GroupSpec, x, margin: float = 3.0) -> CocycleSample:
    """``c(x)`` for any variant."""
    if isinstance(model, Frog):
        return frog_sample(model, env, spec, x, margin)
    return first_passage(model, env, spec, x, margin)


def evaluate_many(model: Model, env: Environment, spec: GroupSpec, targets, margin: float = 3.0,
                  base=None, cap: int = 128) -> list[CocycleSample]:
    """Shifted cocycle values of several targets from one flood.

    The truncation radius is ``ceil(margin * max |x|)`` for all of them, so
    each value is at least as accurate as its individual evaluation.
    """
    targets = [G.validate(spec, t) for t in targets]
    base = spec.identity if base is None else G.validate(spec, base)
    tag = dict(seed=env.master_seed, model=model.name, params=params_hash(model))
    norms = [_norm_or_raise(spec, t, cap) for t in targets]
    if not targets:
        return []
    R = max(1, math.ceil(margin * max(norms)))
    w = constant_weight(model)
    if w is not None and not isinstance(model, Frog):
        return [CocycleSample(t, base, w * n, R, False, **tag) for t, n in zip(targets, norms)]
    if isinstance(model, Frog):
        if base != spec.identity:
            raise UnsupportedVariant("frog activation is evaluated from the identity only")
        run = simulate_frogs(model, env, spec, R, model.walk_step_cap)
        out = []
        for t in targets:
            v = run.time_of(t)
            out.append(CocycleSample(t, base, math.inf if v is None else float(v), R, v is None, **tag))
        return out
    f = passage_times(model, env, spec, R, base)
    smin = f.sphere_min
    out = []
    for t in targets:
        v = f.value(t)
        out.append(CocycleSample(t, base, v, R, smin < v, **tag))
    return out


# ---------------------------------------------------------------------------
# torsion / finite-index maximised cocycle


def c_double_prime(model: Model, env: Environment, spec: GroupSpec, x, margin: float = 3.0) -> CocycleSample:
    """Maximum of ``c(y)`` shifted by ``z`` over the finite correction sets.

    ``y`` ranges over ``z_j . [[x]]`` and ``z`` over ``z_i . tor N`` for all
    coset representatives ``z_i, z_j``.  Defined as 0 on the class of the
    identity.
    """
    if not is_fpp(model):
        raise UnsupportedVariant("c'' is evaluated for FPP variants only")
    x = G.validate(spec, x)
    tag = dict(seed=env.master_seed, model=model.name, params=params_hash(model))
    if spec.kind in G.NILPOTENT_KINDS:
        n = x
    elif spec.kind in (G.DIRECT_PRODUCT_FINITE, G.DIHEDRAL):
        n = G.torsion_quotient(spec, x)[0] + (0,)
    else:  # pragma: no cover - catalog is closed
        raise UnsupportedKind(spec.kind)
    if n == spec.identity:
        return CocycleSample(x, spec.identity, 0.0, 0, False, **tag)
    reps = G.coset_representatives(spec)
    tor = G.torsion_subgroup(spec)
    best, radius, touched = -math.inf, 0, False
    for zi in reps:
        for t in tor:
            z = G.multiply(spec, zi, t)
            for zj in reps:
                for t2 in tor:
                    y = G.multiply(spec, zj, G.multiply(spec, n, t2))
                    s = cocycle_shifted(model, env, spec, y, z, margin)
                    best = max(best, s.value)
                    radius = max(radius, s.truncation_radius)
                    touched |= s.boundary_touched
    return CocycleSample(x, spec.identity, best, radius, touched, **tag)
