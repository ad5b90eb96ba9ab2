"""Asymptotic-cone coordinates, shape clouds and Hausdorff distances.

Heisenberg cone points are kept in exponential coordinates ``(u, v, w)``:
``u, v`` span the first layer and ``w`` the second.  The group law is the
degree-2 Baker-Campbell-Hausdorff product

    (u, v, w) . (u', v', w') = (u + u', v + v', w + w' + (u v' - v u') / 2)

and ``to_matrix_coords`` gives the upper-triangular picture ``(u, v, w + uv/2)``.
Abelian cones (free abelian groups, and the dihedral and finite-extension
kinds through their lattice quotient) are plain ``R^d``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, cKDTree

from . import groups as G
from .cayley import grow_ball
from .errors import EmptyCloud, FloodUnbounded, MemoryBudgetExceeded, UnsupportedKind
from .groups import GroupSpec
from .models import Environment, Model, constant_weight, is_fpp, passage_times

EUCLID = "euclid"
HEIS = "heis"


@dataclass(frozen=True)
class ConeKind:
    name: str
    dim: int

    @property
    def first_layer(self) -> int:
        return 2 if self.name == HEIS else self.dim


def cone_kind(spec: GroupSpec) -> ConeKind:
    if spec.kind == G.FREE_ABELIAN:
        return ConeKind(EUCLID, spec.dim)
    if spec.kind == G.HEISENBERG:
        return ConeKind(HEIS, 3)
    if spec.kind == G.DIRECT_PRODUCT_FINITE:
        return cone_kind(spec.base)
    if spec.kind == G.DIHEDRAL:
        return ConeKind(EUCLID, spec.base.dim)
    raise UnsupportedKind(spec.kind)  # pragma: no cover


def _lattice_part(spec: GroupSpec, coords: np.ndarray) -> np.ndarray:
    """Coordinates of the nilpotent lattice quotient the cone is built on."""
    if spec.kind in G.NILPOTENT_KINDS:
        return coords
    return G.quotient_batch(spec, coords)


def rescale_batch(spec: GroupSpec, coords, t: float) -> np.ndarray:
    """``(1/t) . x`` for each row of ``coords``, in exponential coordinates."""
    if not t > 0:
        raise ValueError("t must be positive")
    a = _lattice_part(spec, np.asarray(coords, dtype=np.int64).reshape(-1, spec.ncoords)).astype(float)
    kind = cone_kind(spec)
    if kind.name == EUCLID:
        return a / t
    x, y, z = a[:, 0], a[:, 1], a[:, 2]
    return np.stack([x / t, y / t, (z - 0.5 * x * y) / (t * t)], axis=1)


def rescale(spec: GroupSpec, x, t: float) -> np.ndarray:
    return rescale_batch(spec, np.asarray(G.validate(spec, x)), t)[0]


def to_matrix_coords(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = p.copy()
    out[..., 2] = p[..., 2] + 0.5 * p[..., 0] * p[..., 1]
    return out


def from_matrix_coords(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    out = p.copy()
    out[..., 2] = p[..., 2] - 0.5 * p[..., 0] * p[..., 1]
    return out


def heisenberg_limit(x) -> np.ndarray:
    """Limit of ``(1/n) . x^n`` in exponential coordinates: ``(x, y, 0)``."""
    return np.array([float(x[0]), float(x[1]), 0.0])


def dilate(p, t: float, kind: ConeKind | None = None) -> np.ndarray:
    """``delta_t``: grade ``i`` scales by ``t**i``."""
    p = np.asarray(p, dtype=float)
    heis = kind.name == HEIS if kind is not None else False
    if not heis:
        return t * p
    out = t * p
    out[..., 2] = (t * t) * p[..., 2]
    return out


def project_ab(p, kind: ConeKind) -> np.ndarray:
    return np.asarray(p, dtype=float)[..., :kind.first_layer]


def quasi_norm(p, kind: ConeKind) -> np.ndarray:
    """Euclidean norm, or ``((u^2+v^2)^2 + w^2)^(1/4)`` on the Heisenberg cone."""
    p = np.asarray(p, dtype=float)
    if kind.name == EUCLID:
        return np.sqrt(np.sum(p * p, axis=-1))
    r2 = p[..., 0] ** 2 + p[..., 1] ** 2
    return np.sqrt(np.sqrt(r2 * r2 + p[..., 2] ** 2))


def cone_mul(p, q, kind: ConeKind) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    out = p + q
    if kind.name == HEIS:
        out[..., 2] += 0.5 * (p[..., 0] * q[..., 1] - p[..., 1] * q[..., 0])
    return out


def cone_inv(p, kind: ConeKind) -> np.ndarray:
    return -np.asarray(p, dtype=float)


def difference(p, q, kind: ConeKind) -> np.ndarray:
    """``q^{-1} . p``."""
    return cone_mul(cone_inv(q, kind), p, kind)


def distance(p, q, kind: ConeKind) -> np.ndarray:
    return quasi_norm(difference(p, q, kind), kind)


# ---------------------------------------------------------------------------
# shape clouds


@dataclass
class ShapeCloud:
    points: np.ndarray
    kind: ConeKind
    n: float = 1.0
    model: str = ""
    seeds: tuple = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, self.kind.dim)

    def __len__(self) -> int:
        return len(self.points)

    def dilate(self, t: float) -> ShapeCloud:
        return ShapeCloud(dilate(self.points, t, self.kind), self.kind, self.n, self.model, self.seeds, dict(self.meta))

    def project_ab(self) -> ShapeCloud:
        """First-layer projection, deduplicated, as an abelian cloud."""
        pts = np.unique(project_ab(self.points, self.kind), axis=0)
        return ShapeCloud(pts, ConeKind(EUCLID, self.kind.first_layer), self.n, self.model, self.seeds, dict(self.meta))

    def union(self, other: ShapeCloud) -> ShapeCloud:
        return ShapeCloud(np.concatenate([self.points, other.points]), self.kind, self.n, self.model,
                          tuple(self.seeds) + tuple(other.seeds))

    def to_csv(self, path) -> None:
        seed = " ".join(map(str, self.seeds))
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n"] + [f"p{i}" for i in range(self.kind.dim)] + ["seed"])
            for row in self.points:
                w.writerow([repr(float(self.n))] + [repr(float(v)) for v in row] + [seed])


def _flood_radius(n: float, margin: float) -> int:
    return max(2, math.ceil(margin * n) + 1)


def extract_shape(spec: GroupSpec, model: Model, env: Environment, n: float, margin: float = 1.0,
                  max_radius: Optional[int] = None) -> ShapeCloud:
    """Rescaled random ball ``{(1/n) . x : c(x) <= n}``.

    The flood starts on ``B(e, ceil(margin n) + 1)`` and the ball radius is
    doubled until every vertex on the outer sphere is strictly slower than
    ``n``; at that point no path leaving the ball can reach a new point in
    time, so the cloud is exact.  ``FloodUnbounded`` is raised if that never
    happens below ``max_radius`` or the memory budget.
    """
    kind = cone_kind(spec)
    if n < 0:
        raise ValueError("n must be nonnegative")
    meta = dict(n=n, margin=margin)
    if n == 0 or (constant_weight(model) is not None and constant_weight(model) > 0):
        w = constant_weight(model)
        if n == 0:
            pts = rescale_batch(spec, np.zeros((1, spec.ncoords), dtype=np.int64), 1.0)
            return ShapeCloud(pts, kind, n, model.name, (env.master_seed,), meta)
        ball = grow_ball(spec, int(math.floor(n / w + 1e-12)))
        return ShapeCloud(rescale_batch(spec, ball.coords, n), kind, n, model.name, (env.master_seed,), meta)
    if not is_fpp(model):
        raise ValueError("shape extraction needs an FPP variant")
    R = _flood_radius(n, margin)
    while True:
        if max_radius is not None and R > max_radius:
            raise FloodUnbounded(f"flood for n={n} not contained in radius {max_radius}")
        try:
            f = passage_times(model, env, spec, R, limit=n)
        except MemoryBudgetExceeded as exc:
            raise FloodUnbounded(f"flood for n={n} exceeded the memory budget at radius {R}") from exc
        if f.sphere_min > n:
            break
        R *= 2
    meta["radius"] = R
    inside = f.dist <= n
    return ShapeCloud(rescale_batch(spec, f.ball.coords[inside], n), kind, n, model.name, (env.master_seed,), meta)


# ---------------------------------------------------------------------------
# Hausdorff distance


def _directed(a: np.ndarray, b: np.ndarray, kind: ConeKind, chunk: int = 2048) -> float:
    """``max_{p in a} min_{q in b} d(p, q)``."""
    if kind.name == EUCLID:
        d, _ = cKDTree(b).query(a, k=1)
        return float(np.max(d))
    worst = 0.0
    for i in range(0, len(a), chunk):
        p = a[i:i + chunk]
        best = np.full(len(p), np.inf)
        for j in range(0, len(b), chunk):
            q = b[j:j + chunk]
            d = quasi_norm(difference(p[:, None, :], q[None, :, :], kind), kind)
            best = np.minimum(best, d.min(axis=1))
        worst = max(worst, float(best.max()))
    return worst


def hausdorff(a: ShapeCloud, b: ShapeCloud) -> float:
    if len(a) == 0 or len(b) == 0:
        raise EmptyCloud("Hausdorff distance of an empty cloud")
    if a.kind != b.kind:
        raise ValueError(f"cone kinds differ: {a.kind} vs {b.kind}")
    return max(_directed(a.points, b.points, a.kind), _directed(b.points, a.points, a.kind))


# ---------------------------------------------------------------------------
# phi polygon


def direction_fan(count: int = 16, scale: int = 4) -> list[tuple[int, int]]:
    """Distinct primitive lattice directions close to ``count`` equally spaced angles."""
    out: list[tuple[int, int]] = []
    for k in range(count):
        th = 2 * math.pi * k / count
        v = (round(scale * math.cos(th)), round(scale * math.sin(th)))
        g = math.gcd(*v) or 1
        v = (v[0] // g, v[1] // g)
        if v != (0, 0) and v not in out:
            out.append(v)
    return out


def phi_polygon(directions, phi_values) -> np.ndarray:
    """Vertices ``dir / phi(dir)`` of the abelian unit-ball candidate, hull ordered."""
    pts = np.array([np.asarray(d, float) / float(p) for d, p in zip(directions, phi_values)])
    hull = ConvexHull(pts)
    return pts[hull.vertices]


def fill_polygon(vertices, spacing: float) -> np.ndarray:
    """Grid points of step ``spacing`` inside the convex polygon, plus its vertices."""
    v = np.asarray(vertices, dtype=float)
    hull = ConvexHull(v)
    lo = np.floor(v.min(axis=0) / spacing) * spacing
    hi = v.max(axis=0)
    xs = np.arange(lo[0], hi[0] + spacing, spacing)
    ys = np.arange(lo[1], hi[1] + spacing, spacing)
    grid = np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1).reshape(-1, 2)
    eq = hull.equations
    inside = np.all(grid @ eq[:, :2].T + eq[:, 2] <= 1e-12, axis=1)
    return np.concatenate([grid[inside], v])


def polygon_cloud(directions, phi_values, spacing: float) -> ShapeCloud:
    return ShapeCloud(fill_polygon(phi_polygon(directions, phi_values), spacing), ConeKind(EUCLID, 2))
