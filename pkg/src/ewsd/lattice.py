"""The lattice of subspaces of GF(2)^kappa.

Subspaces are identified by their canonical reduced echelon basis (see
``gf2core.rref``).  Enumeration builds those bases directly from pivot
patterns, so no deduplication is needed and the counts match the Gaussian
binomial by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations, product

import numpy as np

from ewsd.errors import ResourceError, UsageError
from ewsd.gf2core import MAX_KAPPA, rref, span_array

FULL_LATTICE_MAX_KAPPA = 8
HYPERPLANE_MAX_KAPPA = 12


def gaussian_binomial(d: int, d_prime: int) -> int:
    """Number of d'-dimensional subspaces of a d-dimensional space over GF(2)."""
    if not d >= d_prime >= 0:
        return 0
    num = 1
    den = 1
    for i in range(d_prime):
        num *= (1 << (d - i)) - 1
        den *= (1 << (d_prime - i)) - 1
    return num // den


@dataclass(frozen=True)
class Subspace:
    kappa: int
    basis: tuple[int, ...]
    _elements: np.ndarray | None = field(default=None, compare=False, repr=False)

    @classmethod
    def span(cls, kappa: int, vectors) -> "Subspace":
        return cls(kappa, tuple(rref(vectors)))

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def key(self) -> tuple[int, ...]:
        return self.basis

    @property
    def elements(self) -> np.ndarray:
        if self._elements is None:
            object.__setattr__(self, "_elements", span_array(self.basis))
        return self._elements

    def element_list(self) -> list[int]:
        return [int(e) for e in self.elements]

    def __contains__(self, v) -> bool:
        x = int(v)
        for b in reversed(self.basis):
            if (x >> (b.bit_length() - 1)) & 1:
                x ^= b
        return x == 0

    def contains_subspace(self, other: "Subspace") -> bool:
        return all(b in self for b in other.basis)

    def __str__(self):
        return "{" + ",".join(str(e) for e in self.element_list()) + "}"


def zero_space(kappa: int) -> Subspace:
    return Subspace(kappa, ())


def whole_space(kappa: int) -> Subspace:
    return Subspace(kappa, tuple(1 << i for i in range(kappa)))


def _check_kappa(kappa: int, cap: int):
    if kappa < 1:
        raise UsageError(f"kappa must be at least 1, got {kappa}")
    if kappa > cap:
        raise ResourceError(f"this operation needs kappa <= {cap}, got {kappa}")


@lru_cache(maxsize=None)
def _enumerate_bases(kappa: int, d: int) -> tuple[tuple[int, ...], ...]:
    out = []
    for pivots in combinations(range(kappa), d):
        pivot_set = set(pivots)
        # free positions of a basis vector: non-pivot bits below its pivot
        free = [[b for b in range(p) if b not in pivot_set] for p in pivots]
        slots = [(row, b) for row, fb in enumerate(free) for b in fb]
        for fill in product((0, 1), repeat=len(slots)):
            vecs = [1 << p for p in pivots]
            for (row, b), bit in zip(slots, fill):
                if bit:
                    vecs[row] |= 1 << b
            out.append(tuple(vecs))
    out.sort()
    return tuple(out)


def enumerate_subspaces(kappa: int, d: int) -> list[Subspace]:
    """All d-dimensional subspaces of GF(2)^kappa, ordered by canonical key."""
    _check_kappa(kappa, FULL_LATTICE_MAX_KAPPA)
    if not 0 <= d <= kappa:
        raise UsageError(f"dimension {d} out of range for kappa={kappa}")
    return list(_subspace_layer(kappa, d))


@lru_cache(maxsize=None)
def _subspace_layer(kappa: int, d: int) -> tuple[Subspace, ...]:
    return tuple(Subspace(kappa, b) for b in _enumerate_bases(kappa, d))


@lru_cache(maxsize=None)
def element_matrix(kappa: int, d: int) -> np.ndarray:
    """Row s holds the sorted elements of the s-th enumerated d-dim subspace."""
    layer = _subspace_layer(kappa, d)
    if not layer:
        return np.zeros((0, 1 << d), dtype=np.int64)
    mat = np.stack([s.elements for s in layer])
    mat.setflags(write=False)
    return mat


def all_subspaces(kappa: int) -> list[Subspace]:
    out = []
    for d in range(kappa + 1):
        out.extend(enumerate_subspaces(kappa, d))
    return out


def bit_reverse(i: int, kappa: int) -> int:
    out = 0
    for r in range(kappa):
        if (i >> r) & 1:
            out |= 1 << (kappa - 1 - r)
    return out


def hyperplane_parity(i: int, kappa: int) -> int:
    """Parity vector of the i-th hyperplane (1-based ordering)."""
    return bit_reverse(i, kappa)


def null_space(h: int, kappa: int) -> Subspace:
    """The hyperplane {v : h.v = 0} for nonzero parity vector h."""
    top = h.bit_length() - 1
    gens = []
    for j in range(kappa):
        if j == top:
            continue
        gens.append((1 << j) | ((1 << top) if (h >> j) & 1 else 0))
    return Subspace.span(kappa, gens)


def hyperplanes(kappa: int) -> list[Subspace]:
    """The 2^kappa - 1 hyperplanes; index i-1 holds {v : flip(nu(i)).v = 0}."""
    _check_kappa(kappa, HYPERPLANE_MAX_KAPPA)
    return list(_hyperplanes(kappa))


@lru_cache(maxsize=None)
def _hyperplanes(kappa: int) -> tuple[Subspace, ...]:
    return tuple(null_space(hyperplane_parity(i, kappa), kappa) for i in range(1, 1 << kappa))


def subspaces_of(S: Subspace, d_prime: int) -> list[Subspace]:
    """All d'-dimensional subspaces of S."""
    if not 0 <= d_prime <= S.dim:
        raise UsageError(f"dimension {d_prime} out of range for a {S.dim}-dim subspace")
    if S.dim == 0:
        return [S]
    out = []
    for coords in _enumerate_bases(S.dim, d_prime):
        vecs = []
        for c in coords:
            v = 0
            for j, b in enumerate(S.basis):
                if (c >> j) & 1:
                    v ^= b
            vecs.append(v)
        out.append(Subspace.span(S.kappa, vecs))
    out.sort(key=lambda s: s.key)
    return out


def superspace_count(kappa: int, d_prime: int, d: int) -> int:
    """Number of d-dim subspaces containing a fixed d'-dim subspace."""
    if not 0 <= d_prime <= d <= kappa:
        raise UsageError("need 0 <= d' <= d <= kappa")
    return gaussian_binomial(kappa - d_prime, d - d_prime)


OVERLAP_CASES = (
    "inner",          # one vector, inside U
    "outer",          # one vector, outside U
    "pair-in-in",     # two distinct vectors, both inside U
    "pair-in-out",    # one inside U, one outside
    "pair-out-sum-in",  # both outside U, their sum inside
    "pair-out-sum-out",  # both outside U, their sum outside
)


def overlap_superspace_count(kappa: int, u: int, d: int, v: int, case: str) -> int:
    """Closed-form count of d-dim subspaces S with dim(S & U) = v that contain
    the given vector(s), where U is spanned by the first u unit vectors.

    ``case`` is one of ``OVERLAP_CASES``.  Vectors are nonzero (and distinct
    for the pair cases).
    """
    if case not in OVERLAP_CASES:
        raise UsageError(f"unknown overlap case {case!r}; expected one of {OVERLAP_CASES}")
    if v > u or v > d or v < 0:
        return 0
    g = gaussian_binomial
    if case == "inner":
        return g(u - 1, u - v) * 2 ** ((u - v) * (d - v)) * g(kappa - u, d - v)
    if case == "outer":
        return g(u, u - v) * _pow2(u - v, d - v - 1) * g(kappa - u - 1, d - v - 1)
    if case == "pair-in-in":
        return g(u - 2, u - v) * 2 ** ((u - v) * (d - v)) * g(kappa - u, d - v)
    if case in ("pair-in-out", "pair-out-sum-in"):
        return g(u - 1, u - v) * _pow2(u - v, d - v - 1) * g(kappa - u - 1, d - v - 1)
    return g(u, u - v) * _pow2(u - v, d - v - 2) * g(kappa - u - 2, d - v - 2)


def _pow2(a: int, b: int) -> int:
    # the companion binomial is zero whenever b < 0, so any value works there
    return 2 ** (a * b) if a * b >= 0 else 0


def brute_overlap_count(kappa: int, u: int, d: int, v: int, vectors: list[int]) -> int:
    """Direct lattice scan matching ``overlap_superspace_count``."""
    U = Subspace(kappa, tuple(1 << i for i in range(u)))
    count = 0
    for S in enumerate_subspaces(kappa, d):
        if not all(x in S for x in vectors):
            continue
        inter = np.intersect1d(S.elements, U.elements).size
        if inter == 1 << v:
            count += 1
    return count


__all__ = [
    "MAX_KAPPA",
    "Subspace",
    "gaussian_binomial",
    "enumerate_subspaces",
    "hyperplanes",
    "subspaces_of",
    "superspace_count",
    "overlap_superspace_count",
]
