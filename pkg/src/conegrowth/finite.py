"""Finite groups given by multiplication tables.

File format (plain text)::

    order k
    <k lines of k whitespace separated 0-based indices; row g, column h is g.h>
    <one line of k inverse indices>

Index 0 must be the identity.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class FiniteGroupTable:
    order: int
    table: tuple[tuple[int, ...], ...]
    inverse: tuple[int, ...]
    identity_index: int = 0

    def __post_init__(self):
        k = self.order
        if k < 1:
            raise ValueError("order must be positive")
        t = np.asarray(self.table, dtype=np.int64)
        if t.shape != (k, k):
            raise ValueError(f"table must be {k}x{k}, got {t.shape}")
        if self.identity_index != 0:
            raise ValueError("identity must be index 0")
        full = np.arange(k)
        if not (np.array_equal(np.sort(t, axis=1), np.broadcast_to(full, (k, k)))
                and np.array_equal(np.sort(t, axis=0), np.broadcast_to(full[:, None], (k, k)))):
            raise ValueError("table rows and columns must be permutations")
        if not (np.array_equal(t[0], full) and np.array_equal(t[:, 0], full)):
            raise ValueError("index 0 does not act as identity")
        inv = np.asarray(self.inverse, dtype=np.int64)
        if inv.shape != (k,) or not np.all(t[full, inv] == 0):
            raise ValueError("inverse map is inconsistent with the table")
        # associativity, vectorised over all triples (k**3 lookups)
        if k <= 200 and not np.array_equal(t[t[:, :, None], full[None, None, :]],
                                           t[full[:, None, None], t[None, :, :]]):
            raise ValueError("table is not associative")

    @cached_property
    def array(self) -> np.ndarray:
        return np.asarray(self.table, dtype=np.int64)

    @cached_property
    def inverse_array(self) -> np.ndarray:
        return np.asarray(self.inverse, dtype=np.int64)

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    @classmethod
    def from_array(cls, table) -> FiniteGroupTable:
        t = np.asarray(table, dtype=np.int64)
        inv = np.argmin(t, axis=1)  # column where the product is 0
        return cls(order=t.shape[0], table=tuple(map(tuple, t.tolist())), inverse=tuple(inv.tolist()))

    def dump(self, path) -> None:
        lines = [f"order {self.order}"]
        lines += [" ".join(map(str, row)) for row in self.table]
        lines.append(" ".join(map(str, self.inverse)))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> FiniteGroupTable:
        rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
        if not rows or rows[0][0] != "order" or len(rows[0]) != 2:
            raise ValueError(f"{path}: first line must be 'order k'")
        k = int(rows[0][1])
        if len(rows) != k + 2:
            raise ValueError(f"{path}: expected {k + 2} non-empty lines, got {len(rows)}")
        table = tuple(tuple(int(v) for v in r) for r in rows[1:k + 1])
        inverse = tuple(int(v) for v in rows[k + 1])
        return cls(order=k, table=table, inverse=inverse)


def cyclic_table(m: int) -> FiniteGroupTable:
    i = np.arange(m)
    return FiniteGroupTable.from_array((i[:, None] + i[None, :]) % m)


def product_table(a: FiniteGroupTable, b: FiniteGroupTable) -> FiniteGroupTable:
    """Direct product; element (i, j) gets index i * |b| + j."""
    ta, tb = a.array, b.array
    ka, kb = a.order, b.order
    i = np.repeat(np.arange(ka), kb)
    j = np.tile(np.arange(kb), ka)
    t = ta[i[:, None], i[None, :]] * kb + tb[j[:, None], j[None, :]]
    return FiniteGroupTable.from_array(t)


def sl23_table() -> tuple[FiniteGroupTable, list[tuple[int, int, int, int]]]:
    """SL(2, 3) as a table, with the matrices (a, b, c, d) labelling each index.

    The identity matrix is index 0; the rest are in lexicographic order.
    """
    mats = [m for m in itertools.product(range(3), repeat=4) if (m[0] * m[3] - m[1] * m[2]) % 3 == 1]
    ident = (1, 0, 0, 1)
    mats.remove(ident)
    mats.insert(0, ident)
    pos = {m: i for i, m in enumerate(mats)}

    def mm(p, q):
        a, b, c, d = p
        e, f, g, h = q
        return ((a * e + b * g) % 3, (a * f + b * h) % 3, (c * e + d * g) % 3, (c * f + d * h) % 3)

    t = [[pos[mm(p, q)] for q in mats] for p in mats]
    return FiniteGroupTable.from_array(t), mats
