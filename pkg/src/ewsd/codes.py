"""Column-fraction code descriptions and the named constructions.

A code is described up to column order by ``q``: entry ``i`` is the fraction
of generator columns equal to the vector with integer value ``i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ewsd.errors import UsageError
from ewsd.gf2core import MAX_KAPPA, GeneratorMatrix
from ewsd.lattice import Subspace

SUM_TOL = 1e-12
REALIZABLE_TOL = 1e-9


class RealizabilityError(UsageError):
    def __init__(self, report: "RealizabilityReport"):
        self.report = report
        super().__init__(
            f"q is not realizable with n={report.n}; "
            f"n*q_i is non-integral at indices {report.offending[:10]}"
        )


@dataclass(frozen=True)
class RealizabilityReport:
    n: int
    realizable: bool
    offending: list[int]


@dataclass(frozen=True)
class CodeDefinition:
    kappa: int
    q: np.ndarray
    reduced: bool = False
    n: int | None = None  # natural blocklength, when a construction has one
    name: str = ""

    def __post_init__(self):
        if not 1 <= self.kappa <= MAX_KAPPA:
            raise UsageError(f"kappa must be in [1, {MAX_KAPPA}], got {self.kappa}")
        q = np.array(self.q, dtype=float)
        if q.shape != (1 << self.kappa,):
            raise UsageError(f"q must have length 2^kappa = {1 << self.kappa}, got {q.shape}")
        if np.any(q < 0):
            raise UsageError(f"q has negative entries at {np.nonzero(q < 0)[0].tolist()[:10]}")
        if abs(math.fsum(q) - 1.0) > SUM_TOL:
            raise UsageError(f"q must sum to 1 (got {math.fsum(q)!r})")
        if self.reduced and q[0] != 0:
            raise UsageError("a reduced code definition must have q_0 = 0")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    def realizability(self, n: int) -> RealizabilityReport:
        scaled = n * self.q
        bad = np.nonzero(np.abs(scaled - np.round(scaled)) > REALIZABLE_TOL)[0]
        return RealizabilityReport(n, bad.size == 0, bad.tolist())

    def counts(self, n: int) -> np.ndarray:
        report = self.realizability(n)
        if not report.realizable:
            raise RealizabilityError(report)
        return np.round(n * self.q).astype(int)

    def to_json(self) -> dict:
        out = {"kappa": self.kappa, "q": [float(x) for x in self.q]}
        if self.n is not None:
            out["n"] = self.n
        return out


def from_generator(G: GeneratorMatrix) -> CodeDefinition:
    if G.n == 0:
        raise UsageError("generator has no columns")
    counts = np.bincount(np.asarray(G.cols, dtype=np.int64), minlength=1 << G.kappa)
    return CodeDefinition(G.kappa, counts / G.n, reduced=bool(counts[0] == 0), n=G.n)


def to_generator(code: CodeDefinition, n: int | None = None) -> GeneratorMatrix:
    """Generator with n*q_i copies of column i, columns ascending."""
    if n is None:
        n = code.n
    if n is None or n < 1:
        raise UsageError("a positive blocklength is required")
    counts = code.counts(n)
    cols = np.repeat(np.arange(1 << code.kappa), counts)
    return GeneratorMatrix(code.kappa, tuple(int(c) for c in cols))


def uniform_fraction(kappa: int) -> CodeDefinition:
    """Every nonzero column in equal proportion; realized by the simplex code."""
    return subspace_exclusion(kappa, 0)


def subspace_exclusion(kappa: int, u: int) -> CodeDefinition:
    """Equal weight on every vector outside span(e_1..e_u).

    u = 0 is the uniform code and u = kappa-1 the augmented Hadamard code.
    """
    if not 0 <= u <= kappa - 1:
        raise UsageError(f"u must be in [0, kappa-1] = [0, {kappa - 1}], got {u}")
    size = (1 << kappa) - (1 << u)
    q = np.zeros(1 << kappa)
    q[1 << u:] = 1.0 / size
    name = "uniform" if u == 0 else f"sec(u={u})"
    return CodeDefinition(kappa, q, reduced=True, n=size, name=name)


def subspace_exclusion_from(U: Subspace) -> CodeDefinition:
    """Like ``subspace_exclusion`` but excluding an arbitrary subspace U."""
    kappa = U.kappa
    if U.dim >= kappa:
        raise UsageError("cannot exclude the whole space")
    size = (1 << kappa) - (1 << U.dim)
    q = np.full(1 << kappa, 1.0 / size)
    q[U.elements] = 0.0
    return CodeDefinition(kappa, q, reduced=True, n=size, name=f"sec{U}")


def rho(kappa: int, u: int) -> tuple[np.ndarray, float]:
    """Offset from the dimension-u exclusion code to the uniform code, and its
    closed-form length.

    The vector is uniform minus exclusion, so for u > 0 it is positive on the
    nonzero excluded indices and negative outside the excluded subspace.
    """
    if not 0 <= u <= kappa - 1:
        raise UsageError(f"u must be in [0, kappa-1], got {u}")
    vec = uniform_fraction(kappa).q - subspace_exclusion(kappa, u).q
    size = 1 << kappa
    mag = math.sqrt(((1 << u) - 1) / ((size - (1 << u)) * (size - 1)))
    return vec, mag


def load_q(path: str | Path) -> CodeDefinition:
    try:
        doc = json.loads(Path(path).read_text())
        return CodeDefinition(int(doc["kappa"]), np.asarray(doc["q"], dtype=float), n=doc.get("n"))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad q file {path}: {exc}") from exc


def save_q(code: CodeDefinition, path: str | Path):
    Path(path).write_text(json.dumps(code.to_json(), indent=2) + "\n")
