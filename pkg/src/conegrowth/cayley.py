"""Word-metric balls on Cayley graphs.

The Cayley graph has an edge ``{x, s x}`` for every element ``x`` and generator
``s`` (left multiplication), so right translations ``x -> x b`` are graph
isometries and ``d_S(x, y) = |y x^-1|_S``.

Balls are grown breadth first with numpy: every sphere is a block of rows in a
coordinate array, ordered lexicographically by coordinates, and membership
queries go through a sorted array of packed integer keys.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from . import groups as G
from .errors import MemoryBudgetExceeded, NotInBall, UnsupportedKind
from .groups import GroupSpec

DEFAULT_BUDGET_MB = 4096


def budget_bytes() -> int:
    return int(float(os.environ.get("CONEGROWTH_BUDGET_MB", DEFAULT_BUDGET_MB)) * 2 ** 20)


def _bytes_per_element(spec: GroupSpec) -> int:
    # coords + key + sorted key + order + norm + predecessor + neighbour table
    return 8 * spec.ncoords + 8 + 8 + 8 + 4 + 1 + 4 * len(spec.generators)


def coordinate_bounds(spec: GroupSpec, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Inclusive lower bound and range size of each coordinate on B(e, radius)."""
    R = int(radius)
    m = np.abs(spec.generator_array).max(axis=0) if len(spec.generators) else np.zeros(spec.ncoords, dtype=np.int64)
    if spec.kind == G.FREE_ABELIAN:
        b = R * m
        return -b, 2 * b + 1
    if spec.kind == G.HEISENBERG:
        b = np.array([R * m[0], R * m[1], R * m[2] + R * R * m[0] * m[1]], dtype=np.int64)
        return -b, 2 * b + 1
    base_gens = spec.generator_array[:, :-1]
    mb = np.abs(base_gens).max(axis=0)
    if spec.kind == G.DIRECT_PRODUCT_FINITE:
        if spec.base.kind == G.HEISENBERG:
            bb = np.array([R * mb[0], R * mb[1], R * mb[2] + R * R * mb[0] * mb[1]], dtype=np.int64)
        else:
            bb = R * mb
        lo = np.concatenate([-bb, [0]])
        size = np.concatenate([2 * bb + 1, [spec.table.order]])
        return lo.astype(np.int64), size.astype(np.int64)
    bb = R * mb
    return np.concatenate([-bb, [0]]).astype(np.int64), np.concatenate([2 * bb + 1, [2]]).astype(np.int64)


class _Packer:
    """Mixed-radix packing of bounded coordinates into one int64.

    Packing preserves lexicographic order of coordinates.
    """

    def __init__(self, lo: np.ndarray, size: np.ndarray):
        self.lo = np.asarray(lo, dtype=np.int64)
        self.size = np.asarray(size, dtype=np.int64)
        total = 1
        for s in self.size.tolist():
            total *= int(s)
        if total >= 2 ** 62:
            raise OverflowError("coordinate range too large to pack into 64 bits")
        strides = np.ones(len(self.size), dtype=np.int64)
        for i in range(len(self.size) - 2, -1, -1):
            strides[i] = strides[i + 1] * self.size[i + 1]
        self.strides = strides

    def in_range(self, coords: np.ndarray) -> np.ndarray:
        rel = coords - self.lo
        return np.all((rel >= 0) & (rel < self.size), axis=-1)

    def pack(self, coords: np.ndarray) -> np.ndarray:
        return ((coords - self.lo) * self.strides).sum(axis=-1)


@dataclass(eq=False)
class Ball:
    """The word-metric ball ``B(e, radius)``.

    Attributes
    ----------
    coords : ndarray (N, ncoords)
        Elements in BFS order: sphere by sphere, each sphere sorted
        lexicographically.  Index 0 is the identity.
    norms : ndarray (N,)
        Word norm of each element.
    pred : ndarray (N,)
        Generator index ``k`` such that ``coords[i] = s_k * parent``; -1 at the
        identity.
    offsets : ndarray (radius + 2,)
        Sphere ``r`` occupies rows ``offsets[r]:offsets[r + 1]``.
    """

    spec: GroupSpec
    radius: int
    coords: np.ndarray
    norms: np.ndarray
    pred: np.ndarray
    offsets: np.ndarray
    _packer: _Packer = field(repr=False)

    def __len__(self) -> int:
        return len(self.norms)

    @cached_property
    def _sorted(self) -> tuple[np.ndarray, np.ndarray]:
        keys = self._packer.pack(self.coords)
        order = np.argsort(keys, kind="stable")
        return keys[order], order

    def index_of(self, coords) -> np.ndarray:
        """Row index of each queried element, -1 where it lies outside the ball."""
        q = np.asarray(coords, dtype=np.int64)
        single = q.ndim == 1
        q = q.reshape(-1, self.spec.ncoords)
        ok = self._packer.in_range(q)
        out = np.full(len(q), -1, dtype=np.int64)
        if ok.any():
            skeys, order = self._sorted
            k = self._packer.pack(q[ok])
            pos = np.searchsorted(skeys, k)
            pos_c = np.minimum(pos, len(skeys) - 1)
            hit = skeys[pos_c] == k
            res = np.where(hit, order[pos_c], -1)
            out[ok] = res
        return out[0] if single else out

    def __contains__(self, g) -> bool:
        return int(self.index_of(g)) >= 0

    def norm_of(self, g) -> int:
        i = int(self.index_of(g))
        if i < 0:
            raise NotInBall(f"{tuple(g)} is not in the ball of radius {self.radius}")
        return int(self.norms[i])

    def sphere(self, r: int) -> np.ndarray:
        return self.coords[self.offsets[r]:self.offsets[r + 1]]

    @property
    def sphere_sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    @cached_property
    def neighbors(self) -> np.ndarray:
        """``neighbors[i, k]`` is the row of ``s_k * coords[i]`` or -1 if outside."""
        gens = self.spec.generator_array
        out = np.empty((len(self), len(gens)), dtype=np.int32 if len(self) < 2 ** 31 else np.int64)
        for k in range(len(gens)):
            out[:, k] = self.index_of(G.mul_batch(self.spec, gens[k], self.coords))
        return out

    def restrict(self, radius: int) -> "Ball":
        if radius > self.radius:
            raise ValueError("cannot restrict to a larger radius")
        n = int(self.offsets[radius + 1])
        return Ball(self.spec, radius, self.coords[:n], self.norms[:n], self.pred[:n],
                    self.offsets[:radius + 2], _packer_for(self.spec, radius))

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind"] + [f"c{i}" for i in range(self.spec.ncoords)] + ["word_norm"])
            for row, n in zip(self.coords.tolist(), self.norms.tolist()):
                w.writerow([self.spec.kind] + row + [n])


def _packer_for(spec: GroupSpec, radius: int) -> _Packer:
    lo, size = coordinate_bounds(spec, radius)
    return _Packer(lo, size)


def _bfs(spec: GroupSpec, radius: int, max_elements: int) -> Ball:
    packer = _packer_for(spec, radius)
    gens = spec.generator_array
    K = len(gens)
    ident = np.zeros((1, spec.ncoords), dtype=np.int64)
    spheres = [ident]
    preds = [np.array([-1], dtype=np.int8)]
    sphere_keys = [packer.pack(ident)]
    total = 1
    for r in range(1, radius + 1):
        front = spheres[-1]
        if len(front) == 0:
            spheres.append(front)
            preds.append(np.empty(0, dtype=np.int8))
            sphere_keys.append(np.empty(0, dtype=np.int64))
            continue
        # frontier-major layout so the first hit per element comes from the
        # earliest frontier row and, within it, the smallest generator index
        cand = G.mul_batch(spec, gens[None, :, :], front[:, None, :]).reshape(-1, spec.ncoords)
        gidx = np.tile(np.arange(K, dtype=np.int8), len(front))
        keys = packer.pack(cand)
        ukeys, first = np.unique(keys, return_index=True)
        fresh = np.ones(len(ukeys), dtype=bool)
        for prev in sphere_keys[-2:]:
            if len(prev):
                pos = np.minimum(np.searchsorted(prev, ukeys), len(prev) - 1)
                fresh &= prev[pos] != ukeys
        ukeys, first = ukeys[fresh], first[fresh]
        total += len(ukeys)
        if total > max_elements:
            raise MemoryBudgetExceeded(
                f"ball of radius {radius} exceeds the element cap {max_elements} at radius {r}")
        spheres.append(cand[first])
        preds.append(gidx[first])
        sphere_keys.append(ukeys)
    sizes = [len(s) for s in spheres]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    norms = np.repeat(np.arange(radius + 1, dtype=np.int32), sizes)
    return Ball(spec, radius, np.concatenate(spheres), norms, np.concatenate(preds), offsets, packer)


_BALL_CACHE: dict[GroupSpec, Ball] = {}
_RESTRICTED: dict[tuple[GroupSpec, int], Ball] = {}


def grow_ball(spec: GroupSpec, radius: int, max_elements: Optional[int] = None) -> Ball:
    """All elements of word norm at most ``radius``, with norms and BFS predecessors.

    Balls are cached per group; smaller radii are served by restricting the
    largest ball grown so far.
    """
    R = int(radius)
    if R < 0:
        raise ValueError("radius must be non-negative")
    if max_elements is None:
        max_elements = budget_bytes() // _bytes_per_element(spec)
    big = _BALL_CACHE.get(spec)
    if big is not None and big.radius >= R:
        if big.radius == R:
            return big
        key = (spec, R)
        if key not in _RESTRICTED:
            if len(_RESTRICTED) > 16:
                _RESTRICTED.clear()
            _RESTRICTED[key] = big.restrict(R)
        return _RESTRICTED[key]
    ball = _bfs(spec, R, max_elements)
    _BALL_CACHE[spec] = ball
    for k in [k for k in _RESTRICTED if k[0] == spec]:
        del _RESTRICTED[k]
    return ball


def clear_cache() -> None:
    _BALL_CACHE.clear()
    _RESTRICTED.clear()


def word_norm(spec: GroupSpec, x, cap: int = 64) -> Optional[int]:
    """Exact word norm of ``x`` if it is at most ``cap``, else ``None``.

    Meet-in-the-middle: with ``b`` ranging over ``B(e, r)``, the minimum ``v``
    of ``|b| + |x b^-1|`` over pairs inside the ball is never below ``|x|``
    and equals it whenever ``|x| <= 2r`` (split a geodesic in half).  So
    ``v <= 2r`` certifies ``v = |x|``.  The radius doubles from 4 up to
    ``ceil(cap/2)``.
    """
    x = G.validate(spec, x)
    if x == spec.identity:
        return 0
    if cap <= 0:
        return None
    r_max = math.ceil(cap / 2)
    r = min(4, r_max)
    while True:
        ball = grow_ball(spec, r)
        direct = int(ball.index_of(x))
        if direct >= 0:
            n = int(ball.norms[direct])
            return n if n <= cap else None
        rest = G.mul_batch(spec, np.asarray(x, dtype=np.int64), G.inv_batch(spec, ball.coords))
        idx = ball.index_of(rest)
        ok = idx >= 0
        if ok.any():
            best = int((ball.norms[ok] + ball.norms[idx[ok]]).min())
            if best <= 2 * r or r >= r_max:
                return best if best <= cap else None
        elif r >= r_max:
            return None
        r = min(2 * r, r_max)


def abelian_spec(spec: GroupSpec) -> GroupSpec:
    """``Z^k`` generated by the abelianised generators (zeros dropped)."""
    if spec.kind not in G.NILPOTENT_KINDS:
        raise UnsupportedKind(f"abelianised norm is not defined here for {spec.kind}")
    proj = []
    for s in spec.generators:
        v = G.abelianize(spec, s)
        if any(v) and v not in proj:
            proj.append(v)
    return G.free_abelian(len(G.abelianize(spec, spec.identity)), proj)


def ab_norm(spec: GroupSpec, x) -> int:
    """Infimum of the word norm over the coset ``x [G, G]``.

    Computed as the word norm of the abelianised element in the abelianised
    Cayley graph.
    """
    aspec = abelian_spec(spec)
    v = G.abelianize(spec, x)
    cap = 16
    while True:
        n = word_norm(aspec, v, cap)
        if n is not None:
            return n
        cap *= 2


def geodesic(spec: GroupSpec, ball: Ball, x) -> list[int]:
    """Generator indices ``[k_1, ..., k_n]`` with ``x = s_{k_n} ... s_{k_1}``.

    Replay by left-multiplying the identity by ``s_{k_1}``, then ``s_{k_2}``
    and so on; ``n`` equals the word norm of ``x``.
    """
    i = int(ball.index_of(G.validate(spec, x)))
    if i < 0:
        raise NotInBall(f"{tuple(x)} is not in the ball of radius {ball.radius}")
    gens = spec.generator_array
    inv = spec.inverse_generator
    word = []
    g = ball.coords[i]
    while ball.pred[i] >= 0:
        k = int(ball.pred[i])
        word.append(k)
        g = G.mul_batch(spec, gens[inv[k]], g)
        i = int(ball.index_of(g))
    return word[::-1]


def replay(spec: GroupSpec, word) -> G.Element:
    g = spec.identity
    for k in word:
        g = G.multiply(spec, spec.generators[k], g)
    return g


@dataclass(frozen=True)
class EdgeKey:
    """Canonical key of the undirected edge ``{x, s x}``."""

    lo: G.Element
    hi: G.Element
    direction_class: int

    @classmethod
    def of(cls, spec: GroupSpec, x, k: int) -> "EdgeKey":
        x = G.validate(spec, x)
        y = G.multiply(spec, spec.generators[k], x)
        lo, hi = (x, y) if x <= y else (y, x)
        return cls(lo, hi, spec.direction_classes[k])


def canonical_edges(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise lexicographic (min, max) of two coordinate arrays."""
    d = a - b
    nz = d != 0
    first = np.argmax(nz, axis=1)
    lead = d[np.arange(len(d)), first]
    a_lo = lead <= 0
    lo = np.where(a_lo[:, None], a, b)
    hi = np.where(a_lo[:, None], b, a)
    return lo, hi
