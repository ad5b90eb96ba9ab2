"""Exact arithmetic for a closed catalog of groups of polynomial growth.

Elements are flat integer tuples:

* ``free_abelian``: ``(c_1, ..., c_d)``
* ``heisenberg``: ``(x, y, z)`` standing for the unipotent matrix
  ``[[1, x, z], [0, 1, y], [0, 0, 1]]``
* ``direct_product_finite``: base coordinates followed by a table index
* ``dihedral``: base coordinates of ``Z^d`` followed by ``r`` in ``{0, 1}``

Scalar operations use Python integers and raise ``OverflowError`` once any
coordinate leaves the signed 64-bit range; the batched ``*_batch`` variants
work on ``int64`` arrays and are what the ball and passage-time code use.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import ShapeMismatch, UnsupportedKind
from .finite import FiniteGroupTable

Element = tuple[int, ...]

FREE_ABELIAN = "free_abelian"
HEISENBERG = "heisenberg"
DIRECT_PRODUCT_FINITE = "direct_product_finite"
DIHEDRAL = "dihedral"
KINDS = (FREE_ABELIAN, HEISENBERG, DIRECT_PRODUCT_FINITE, DIHEDRAL)
NILPOTENT_KINDS = (FREE_ABELIAN, HEISENBERG)

INT64_MAX = (1 << 63) - 1


@dataclass(frozen=True)
class GroupSpec:
    """A catalog group together with a finite symmetric generating set.

    Use the constructors :func:`free_abelian`, :func:`heisenberg`,
    :func:`direct_product_finite` and :func:`dihedral` rather than building
    this directly.
    """

    kind: str
    generators: tuple[Element, ...]
    dim: int = 0
    base: Optional["GroupSpec"] = None
    table: Optional[FiniteGroupTable] = field(default=None, compare=True)
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.kind == DIHEDRAL and (self.base is None or self.base.kind != FREE_ABELIAN):
            raise ValueError("dihedral groups need a free abelian base")
        if self.kind == DIRECT_PRODUCT_FINITE and (self.base is None or self.table is None):
            raise ValueError("direct_product_finite needs a base and a finite table")
        gens = [validate(self, g) for g in self.generators]
        if len(set(gens)) != len(gens):
            raise ValueError("generators must be distinct")
        ident = self.identity
        if ident in gens:
            raise ValueError("the identity may not be a generator")
        gs = set(gens)
        for g in gens:
            if inverse(self, g) not in gs:
                raise ValueError(f"generating set is not symmetric: inverse of {g} missing")

    # -- shape ---------------------------------------------------------
    @property
    def ncoords(self) -> int:
        if self.kind == FREE_ABELIAN:
            return self.dim
        if self.kind == HEISENBERG:
            return 3
        return self.base.ncoords + 1

    @property
    def identity(self) -> Element:
        return (0,) * self.ncoords

    @property
    def growth_degree(self) -> int:
        """Homogeneous dimension of the asymptotic cone."""
        if self.kind == FREE_ABELIAN:
            return self.dim
        if self.kind == HEISENBERG:
            return 4
        return self.base.growth_degree

    @property
    def index(self) -> int:
        """Index of the nilpotent normal subgroup N used for the torsion quotient."""
        if self.kind == DIRECT_PRODUCT_FINITE:
            return self.table.order
        if self.kind == DIHEDRAL:
            return 2
        return 1

    @cached_property
    def generator_array(self) -> np.ndarray:
        return np.asarray(self.generators, dtype=np.int64).reshape(len(self.generators), self.ncoords)

    @cached_property
    def inverse_generator(self) -> tuple[int, ...]:
        """For each generator index, the index of its inverse."""
        pos = {g: i for i, g in enumerate(self.generators)}
        return tuple(pos[inverse(self, g)] for g in self.generators)

    @cached_property
    def direction_classes(self) -> tuple[int, ...]:
        """Class id of each generator; ``s`` and ``s^-1`` share a class."""
        cls: dict[int, int] = {}
        out = []
        for i, j in enumerate(self.inverse_generator):
            key = min(i, j)
            if key not in cls:
                cls[key] = len(cls)
            out.append(cls[key])
        return tuple(out)

    @property
    def n_direction_classes(self) -> int:
        return len(set(self.direction_classes))

    def describe(self) -> str:
        if self.name:
            return self.name
        if self.kind == FREE_ABELIAN:
            return f"Z^{self.dim}"
        if self.kind == HEISENBERG:
            return "H3(Z)"
        if self.kind == DIHEDRAL:
            return f"Dih({self.base.describe()})"
        return f"{self.base.describe()} x F{self.table.order}"


# ---------------------------------------------------------------------------
# constructors


def _unit_generators(d: int) -> list[Element]:
    gens = []
    for i in range(d):
        for sgn in (1, -1):
            v = [0] * d
            v[i] = sgn
            gens.append(tuple(v))
    return gens


def free_abelian(d: int, generators: Optional[Sequence[Sequence[int]]] = None) -> GroupSpec:
    if d < 1:
        raise ValueError("dimension must be at least 1")
    gens = _unit_generators(d) if generators is None else [tuple(int(c) for c in g) for g in generators]
    return GroupSpec(FREE_ABELIAN, tuple(gens), dim=d)


def heisenberg(generators: Optional[Sequence[Sequence[int]]] = None) -> GroupSpec:
    """Discrete Heisenberg group; default generators X^{+-1}, Y^{+-1}."""
    if generators is None:
        gens = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]
    else:
        gens = [tuple(int(c) for c in g) for g in generators]
    return GroupSpec(HEISENBERG, tuple(gens))


def direct_product_finite(
    base: GroupSpec,
    table: FiniteGroupTable,
    finite_generators: Sequence[int],
    style: str = "union",
) -> GroupSpec:
    """``base x M`` for a finite group ``M`` given by its table.

    ``style="union"`` uses ``(S_L x {e}) u ({e} x S_M)``; ``style="product"``
    uses ``S_L x (S_M u {e})``.  ``finite_generators`` must be symmetric in
    ``M``.
    """
    if base.kind not in NILPOTENT_KINDS:
        raise UnsupportedKind("base of a direct product must be free abelian or Heisenberg")
    fg = sorted(set(int(i) for i in finite_generators))
    if 0 in fg:
        raise ValueError("finite generators may not contain the identity index")
    e = base.identity
    if style == "union":
        gens = [tuple(s) + (0,) for s in base.generators] + [e + (j,) for j in fg]
    elif style == "product":
        gens = [tuple(s) + (j,) for s in base.generators for j in [0] + fg]
    else:
        raise ValueError(f"unknown generating-set style {style!r}")
    return GroupSpec(DIRECT_PRODUCT_FINITE, tuple(gens), base=base, table=table)


def dihedral(d: int) -> GroupSpec:
    """Generalised dihedral group ``Z^d x| Z_2`` with ``r = 1`` acting by ``-id``."""
    base = free_abelian(d)
    gens = [tuple(s) + (0,) for s in base.generators] + [(0,) * d + (1,)]
    return GroupSpec(DIHEDRAL, tuple(gens), base=base)


# ---------------------------------------------------------------------------
# scalar arithmetic


def _checked(coords) -> Element:
    for c in coords:
        if c > INT64_MAX or c < -INT64_MAX:
            raise OverflowError(f"coordinate {c} exceeds the signed 64-bit range")
    return tuple(coords)


def validate(spec: GroupSpec, g) -> Element:
    g = tuple(int(c) for c in g)
    if len(g) != spec.ncoords:
        raise ShapeMismatch(f"{spec.kind} elements have {spec.ncoords} coordinates, got {len(g)}")
    if spec.kind == DIRECT_PRODUCT_FINITE and not 0 <= g[-1] < spec.table.order:
        raise ShapeMismatch(f"finite index {g[-1]} out of range")
    if spec.kind == DIHEDRAL and g[-1] not in (0, 1):
        raise ShapeMismatch("dihedral flip coordinate must be 0 or 1")
    return _checked(g)


def _mul(spec: GroupSpec, g: Element, h: Element) -> Element:
    k = spec.kind
    if k == FREE_ABELIAN:
        return tuple(a + b for a, b in zip(g, h))
    if k == HEISENBERG:
        return (g[0] + h[0], g[1] + h[1], g[2] + h[2] + g[0] * h[1])
    if k == DIRECT_PRODUCT_FINITE:
        return _mul(spec.base, g[:-1], h[:-1]) + (spec.table.table[g[-1]][h[-1]],)
    # dihedral: (x, r)(y, r') = (x + (-1)^r y, r + r')
    sgn = -1 if g[-1] else 1
    return tuple(a + sgn * b for a, b in zip(g[:-1], h[:-1])) + ((g[-1] + h[-1]) % 2,)


def multiply(spec: GroupSpec, g, h) -> Element:
    g, h = validate(spec, g), validate(spec, h)
    return _checked(_mul(spec, g, h))


def _inv(spec: GroupSpec, g: Element) -> Element:
    k = spec.kind
    if k == FREE_ABELIAN:
        return tuple(-a for a in g)
    if k == HEISENBERG:
        x, y, z = g
        return (-x, -y, x * y - z)
    if k == DIRECT_PRODUCT_FINITE:
        return _inv(spec.base, g[:-1]) + (spec.table.inverse[g[-1]],)
    r = g[-1]
    return (tuple(g[:-1]) if r else tuple(-a for a in g[:-1])) + (r,)


def inverse(spec: GroupSpec, g) -> Element:
    return _checked(_inv(spec, validate(spec, g)))


def power(spec: GroupSpec, g, n: int) -> Element:
    """``g**n``; closed form on the nilpotent kinds, square-and-multiply otherwise."""
    g = validate(spec, g)
    n = int(n)
    if n < 0:
        return power(spec, _inv(spec, g), -n)
    if spec.kind == FREE_ABELIAN:
        return _checked(tuple(n * a for a in g))
    if spec.kind == HEISENBERG:
        x, y, z = g
        return _checked((n * x, n * y, n * z + n * (n - 1) // 2 * x * y))
    result, base = spec.identity, g
    while n:
        if n & 1:
            result = _checked(_mul(spec, result, base))
        n >>= 1
        if n:
            base = _checked(_mul(spec, base, base))
    return result


def commutator(spec: GroupSpec, g, h) -> Element:
    """``[g, h] = g h g^-1 h^-1``."""
    g, h = validate(spec, g), validate(spec, h)
    out = _mul(spec, g, h)
    out = _mul(spec, _checked(out), _inv(spec, g))
    return _checked(_mul(spec, _checked(out), _inv(spec, h)))


def product(spec: GroupSpec, elements) -> Element:
    """Left-to-right product of a sequence of elements."""
    out = spec.identity
    for e in elements:
        out = multiply(spec, out, e)
    return out


# ---------------------------------------------------------------------------
# abelianisation and torsion quotient


def coset_representatives(spec: GroupSpec) -> list[Element]:
    """Fixed representatives of the cosets of N, identity first."""
    if spec.kind == DIRECT_PRODUCT_FINITE:
        e = spec.base.identity
        return [e + (j,) for j in range(spec.table.order)]
    if spec.kind == DIHEDRAL:
        e = spec.base.identity
        return [e + (0,), e + (1,)]
    return [spec.identity]


def torsion_subgroup(spec: GroupSpec) -> list[Element]:
    """Torsion of N; every catalog base is torsion-free."""
    return [spec.identity]


def torsion_quotient(spec: GroupSpec, g) -> tuple[Element, int]:
    """Project ``g`` to ``N / tor N`` via ``z_j^-1 g`` and report the coset ``j``."""
    g = validate(spec, g)
    if spec.kind not in (DIRECT_PRODUCT_FINITE, DIHEDRAL):
        raise UnsupportedKind(f"torsion quotient is the identity map on {spec.kind}")
    j = g[-1]
    z = coset_representatives(spec)[j]
    n = _checked(_mul(spec, _inv(spec, z), g))
    assert n[-1] == 0
    return n[:-1], j


def quotient_spec(spec: GroupSpec) -> GroupSpec:
    """The group N / tor N that the torsion quotient lands in."""
    if spec.kind in (DIRECT_PRODUCT_FINITE, DIHEDRAL):
        return spec.base
    return spec


def abelianize(spec: GroupSpec, g) -> tuple[int, ...]:
    g = validate(spec, g)
    if spec.kind == FREE_ABELIAN:
        return g
    if spec.kind == HEISENBERG:
        return g[:2]
    if spec.kind == DIRECT_PRODUCT_FINITE:
        return abelianize(spec.base, g[:-1])
    # dihedral: N-coordinate of the torsion quotient
    return torsion_quotient(spec, g)[0]


# ---------------------------------------------------------------------------
# batched arithmetic on int64 arrays of shape (..., ncoords)


def mul_batch(spec: GroupSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    k = spec.kind
    if k == FREE_ABELIAN:
        return a + b
    if k == HEISENBERG:
        a, b = np.broadcast_arrays(a, b)
        out = a + b
        out[..., 2] += a[..., 0] * b[..., 1]
        return out
    if k == DIRECT_PRODUCT_FINITE:
        a, b = np.broadcast_arrays(a, b)
        out = np.empty(a.shape, dtype=np.int64)
        out[..., :-1] = mul_batch(spec.base, a[..., :-1], b[..., :-1])
        out[..., -1] = spec.table.array[a[..., -1], b[..., -1]]
        return out
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape, dtype=np.int64)
    sgn = 1 - 2 * a[..., -1:]
    out[..., :-1] = a[..., :-1] + sgn * b[..., :-1]
    out[..., -1] = (a[..., -1] + b[..., -1]) % 2
    return out


def inv_batch(spec: GroupSpec, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    k = spec.kind
    if k == FREE_ABELIAN:
        return -a
    if k == HEISENBERG:
        out = -a
        out[..., 2] = a[..., 0] * a[..., 1] - a[..., 2]
        return out
    if k == DIRECT_PRODUCT_FINITE:
        out = np.empty(a.shape, dtype=np.int64)
        out[..., :-1] = inv_batch(spec.base, a[..., :-1])
        out[..., -1] = spec.table.inverse_array[a[..., -1]]
        return out
    out = a.copy()
    sgn = 2 * a[..., -1:] - 1
    out[..., :-1] = sgn * a[..., :-1]
    return out


def abelianize_batch(spec: GroupSpec, a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    if spec.kind == FREE_ABELIAN:
        return a
    if spec.kind == HEISENBERG:
        return a[..., :2]
    if spec.kind == DIRECT_PRODUCT_FINITE:
        return abelianize_batch(spec.base, a[..., :-1])
    return quotient_batch(spec, a)


def quotient_batch(spec: GroupSpec, a: np.ndarray) -> np.ndarray:
    """Batched torsion quotient coordinates (identity map on nilpotent kinds)."""
    a = np.asarray(a, dtype=np.int64)
    if spec.kind == DIRECT_PRODUCT_FINITE:
        return a[..., :-1]
    if spec.kind == DIHEDRAL:
        # z_1 = (0, 1) is an involution, z_1^-1 (x, 1) = (-x, 0)
        sgn = 1 - 2 * a[..., -1:]
        return sgn * a[..., :-1]
    return a
