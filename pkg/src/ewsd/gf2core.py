"""Bit-level linear algebra over GF(2).

A column vector of height kappa is stored as an int whose bit ``i-1`` holds
row ``i``.  With that convention the integer value of a column is exactly its
index in the global space, so histogramming columns gives the q vector.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from ewsd.errors import UsageError

MAX_KAPPA = 20


@dataclass(frozen=True)
class BinVec:
    bits: int
    width: int

    def __post_init__(self):
        if not 1 <= self.width <= MAX_KAPPA:
            raise UsageError(f"width must be in [1, {MAX_KAPPA}], got {self.width}")
        if not 0 <= self.bits < (1 << self.width):
            raise UsageError(f"bits {self.bits} do not fit in width {self.width}")

    def __int__(self):
        return self.bits

    def __index__(self):
        return self.bits

    def __str__(self):
        # row 1 first, matching the way columns are printed in a matrix
        return "".join("1" if (self.bits >> r) & 1 else "0" for r in range(self.width))


VecLike = Union[int, BinVec]


def _as_ints(vectors: Iterable[VecLike]) -> list[int]:
    out = []
    width = None
    for v in vectors:
        if isinstance(v, BinVec):
            if width is None:
                width = v.width
            elif v.width != width:
                raise UsageError(f"mixed vector widths {width} and {v.width}")
            out.append(v.bits)
        else:
            v = int(v)
            if v < 0:
                raise UsageError("bitmasks must be nonnegative")
            out.append(v)
    return out


def rank(vectors: Iterable[VecLike]) -> int:
    """Dimension of the span of ``vectors``."""
    basis: list[int] = []
    for x in _as_ints(vectors):
        # each basis entry has a distinct leading bit not present in later ones
        for b in basis:
            x = min(x, x ^ b)
        if x:
            basis.append(x)
    return len(basis)


def rref(vectors: Iterable[VecLike]) -> list[int]:
    """Canonical reduced echelon basis of the span.

    The pivot of a vector is its highest set bit.  Output is sorted by pivot
    (strictly increasing) and every pivot bit is cleared from all other basis
    vectors, which makes the result unique for a given span.
    """
    pivots: dict[int, int] = {}
    for x in _as_ints(vectors):
        for p in sorted(pivots, reverse=True):
            if (x >> p) & 1:
                x ^= pivots[p]
        if not x:
            continue
        p = x.bit_length() - 1
        for q in pivots:
            if (pivots[q] >> p) & 1:
                pivots[q] ^= x
        pivots[p] = x
    return [pivots[p] for p in sorted(pivots)]


def span_elements(basis: Sequence[VecLike]) -> list[int]:
    """All 2^d XOR combinations of an independent basis, ascending."""
    ints = _as_ints(basis)
    if rank(ints) != len(ints):
        raise UsageError("basis vectors are linearly dependent")
    return [int(e) for e in span_array(ints)]


def span_array(basis: Sequence[int]) -> np.ndarray:
    """Sorted numpy array of the span of an independent basis (no checks)."""
    elems = np.zeros(1, dtype=np.int64)
    for b in basis:
        elems = np.concatenate([elems, elems ^ int(b)])
    elems.sort()
    return elems


def in_span(x: int, basis: Sequence[int]) -> bool:
    return rank(list(basis) + [x]) == rank(basis)


def popcount_array(a: np.ndarray) -> np.ndarray:
    """Per-element popcount for a nonnegative int64 array."""
    a = a.astype(np.int64, copy=True)
    count = np.zeros_like(a)
    while True:
        nz = a != 0
        if not nz.any():
            return count
        count += nz
        a &= a - 1


def selection_ranks(cols: Sequence[int], masks: np.ndarray, kappa: int) -> np.ndarray:
    """rank of the columns picked by each mask, vectorized over masks.

    Bit ``j`` of a mask selects ``cols[j]``.  Each mask is eliminated
    independently; there is no sharing of work between masks.
    """
    masks = np.asarray(masks, dtype=np.int64)
    basis = np.zeros((kappa, masks.size), dtype=np.int64)
    for j, c in enumerate(cols):
        c = int(c)
        if c == 0:
            continue
        sel = np.nonzero((masks >> j) & 1)[0]
        if sel.size == 0:
            continue
        x = np.full(sel.size, c, dtype=np.int64)
        for b in range(kappa - 1, -1, -1):
            hit = ((x >> b) & 1).astype(bool)
            if not hit.any():
                continue
            slot = basis[b, sel]
            empty = hit & (slot == 0)
            basis[b, sel[empty]] = x[empty]
            x[empty] = 0
            red = hit & ~empty
            x[red] ^= slot[red]
    return (basis != 0).sum(axis=0)


@dataclass(frozen=True)
class GeneratorMatrix:
    kappa: int
    cols: tuple[int, ...]

    def __post_init__(self):
        if not 1 <= self.kappa <= MAX_KAPPA:
            raise UsageError(f"kappa must be in [1, {MAX_KAPPA}], got {self.kappa}")
        object.__setattr__(self, "cols", tuple(_as_ints(self.cols)))
        for c in self.cols:
            if c >= (1 << self.kappa):
                raise UsageError(f"column {c} does not fit in {self.kappa} rows")

    @property
    def n(self) -> int:
        return len(self.cols)

    @property
    def k(self) -> int:
        return self.n - self.kappa

    def submatrix(self, positions: Iterable[int]) -> list[int]:
        """Columns at the given 1-based positions."""
        return [self.cols[p - 1] for p in positions]

    def rank(self) -> int:
        return rank(self.cols)

    def is_full_rank(self) -> bool:
        return self.rank() == self.kappa

    def rows(self) -> list[int]:
        """Row bitmasks; bit ``j`` of row ``r`` is the entry in column ``j+1``."""
        out = []
        for r in range(self.kappa):
            row = 0
            for j, c in enumerate(self.cols):
                row |= ((c >> r) & 1) << j
            out.append(row)
        return out

    def to_text(self) -> str:
        lines = []
        for r in range(self.kappa):
            lines.append("".join(str((c >> r) & 1) for c in self.cols))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GeneratorMatrix":
        lines = [re.sub(r"\s+", "", ln) for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if not lines:
            raise UsageError("generator text has no rows")
        n = len(lines[0])
        for ln in lines:
            if len(ln) != n:
                raise UsageError("generator rows have different lengths")
            if set(ln) - {"0", "1"}:
                raise UsageError(f"unexpected character in generator row {ln!r}")
        cols = []
        for j in range(n):
            cols.append(sum(1 << r for r, ln in enumerate(lines) if ln[j] == "1"))
        return cls(len(lines), tuple(cols))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "GeneratorMatrix":
        n = len(rows[0])
        cols = [sum(int(rows[r][j]) << r for r in range(len(rows))) for j in range(n)]
        return cls(len(rows), tuple(cols))


def complete_rows(rows: Sequence[int], n: int) -> list[int]:
    """Unit row vectors that extend independent ``rows`` to a basis of GF(2)^n.

    Greedy: try e_1, e_2, ... in order and keep each one that raises the rank.
    """
    basis = list(_as_ints(rows))
    if rank(basis) != len(basis):
        raise UsageError("rows to complete are linearly dependent")
    extra = []
    for j in range(n):
        e = 1 << j
        if rank(basis + [e]) > len(basis):
            basis.append(e)
            extra.append(e)
        if len(basis) == n:
            break
    return extra
