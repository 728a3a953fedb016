"""Reference metrics by enumerating every erasure pattern.

This module is the trust anchor for everything else, so it stays blunt: each
of the 2^n revealed-position masks gets its own rank computation, and the
per-weight tallies are kept as exact integers until the final weighting.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ewsd.errors import ResourceError, UsageError
from ewsd.gf2core import GeneratorMatrix, complete_rows, popcount_array, rank, selection_ranks

MAX_ORACLE_N = 24
MAX_TV_N = 16
MAX_TV_KAPPA = 8
_CHUNK = 1 << 16


@dataclass(frozen=True)
class ChannelParams:
    mode: str  # "fixed-epsilon" or "fixed-mu"
    n: int
    epsilon: float | None = None
    mu: int | None = None

    def __post_init__(self):
        if self.mode == "fixed-epsilon":
            if self.epsilon is None or self.mu is not None:
                raise UsageError("fixed-epsilon mode takes epsilon only")
            if not 0.0 <= self.epsilon <= 1.0:
                raise UsageError(f"epsilon must be in [0, 1], got {self.epsilon}")
        elif self.mode == "fixed-mu":
            if self.mu is None or self.epsilon is not None:
                raise UsageError("fixed-mu mode takes mu only")
            if not 0 <= self.mu <= self.n:
                raise UsageError(f"mu must be in [0, n={self.n}], got {self.mu}")
        else:
            raise UsageError(f"unknown channel mode {self.mode!r}")
        if self.n < 1:
            raise UsageError("blocklength must be positive")

    @classmethod
    def eps(cls, n: int, epsilon: float) -> "ChannelParams":
        return cls("fixed-epsilon", n, epsilon=float(epsilon))

    @classmethod
    def fixed_mu(cls, n: int, mu: int) -> "ChannelParams":
        return cls("fixed-mu", n, mu=int(mu))

    def to_json(self) -> dict:
        if self.mode == "fixed-epsilon":
            return {"n": self.n, "epsilon": self.epsilon}
        return {"n": self.n, "mu": self.mu}


@dataclass
class MetricResult:
    metric: str  # equivocation-loss | chi2 | total-variation
    method: str  # oracle | subspace | montecarlo
    value: float
    params: ChannelParams
    runtime: float  # seconds
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"metric": self.metric, "method": self.method, "value": self.value}
        out.update(self.params.to_json())
        out["runtime_ms"] = self.runtime * 1e3
        out.update(self.extra)
        return out


class PatternRow(NamedTuple):
    pattern: str  # character j is position j+1; "1" = revealed
    rank: int
    probability: float


def _check_n(G: GeneratorMatrix, cap: int = MAX_ORACLE_N):
    if G.n > cap:
        raise ResourceError(f"enumeration needs n <= {cap}, got n={G.n}")


def pattern_probability(n: int, weight: int, epsilon: float) -> float:
    return epsilon ** (n - weight) * (1.0 - epsilon) ** weight


def mask_to_pattern(mask: int, n: int) -> str:
    return "".join("1" if (mask >> j) & 1 else "0" for j in range(n))


def pattern_table(G: GeneratorMatrix, epsilon: float) -> list[PatternRow]:
    """Every erasure pattern with its rank and probability.

    Rows are grouped by number of revealed positions, then ordered so that
    earlier positions are revealed first.
    """
    _check_n(G)
    n = G.n
    masks = np.arange(1 << n, dtype=np.int64)
    ranks = selection_ranks(G.cols, masks, G.kappa)
    weights = popcount_array(masks)
    rows = [
        PatternRow(mask_to_pattern(m, n), int(r), pattern_probability(n, int(w), epsilon))
        for m, r, w in zip(masks.tolist(), ranks.tolist(), weights.tolist())
    ]
    flip = str.maketrans("01", "10")
    rows.sort(key=lambda row: (row.pattern.count("1"), row.pattern.translate(flip)))
    return rows


def _tally_chunk(args):
    cols, kappa, n, start, stop = args
    masks = np.arange(start, stop, dtype=np.int64)
    ranks = selection_ranks(cols, masks, kappa)
    weights = popcount_array(masks)
    deficit = weights - ranks  # |r| - rank(G_r), always >= 0
    count = np.bincount(weights, minlength=n + 1)
    rank_sum = np.bincount(weights, weights=ranks, minlength=n + 1)
    # 2^deficit fits comfortably in int64 for n <= 24; keep the sums exact
    pow_sum = np.zeros(n + 1, dtype=np.int64)
    np.add.at(pow_sum, weights, np.left_shift(1, deficit))
    return count.astype(np.int64), rank_sum.astype(np.int64), pow_sum


@dataclass(frozen=True)
class WeightTally:
    """Exact per-weight sums over all patterns with w revealed positions."""

    n: int
    count: tuple[int, ...]
    rank_sum: tuple[int, ...]
    pow_sum: tuple[int, ...]  # sum of 2^(w - rank)

    def loss_sum(self, w: int) -> int:
        return w * self.count[w] - self.rank_sum[w]


def weight_tally(G: GeneratorMatrix, workers: int = 1) -> WeightTally:
    """Enumerate all 2^n patterns; chunked and optionally run in processes.

    Integer tallies make the result independent of the worker count.
    """
    _check_n(G)
    n = G.n
    total = 1 << n
    jobs = [(G.cols, G.kappa, n, s, min(s + _CHUNK, total)) for s in range(0, total, _CHUNK)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_tally_chunk, jobs))
    else:
        parts = [_tally_chunk(j) for j in jobs]
    count = [0] * (n + 1)
    rank_sum = [0] * (n + 1)
    pow_sum = [0] * (n + 1)
    for c, r, p in parts:
        for w in range(n + 1):
            count[w] += int(c[w])
            rank_sum[w] += int(r[w])
            pow_sum[w] += int(p[w])
    return WeightTally(n, tuple(count), tuple(rank_sum), tuple(pow_sum))


def weighted_value(tally: WeightTally, params: ChannelParams, per_weight) -> float:
    n = tally.n
    if params.n != n:
        raise UsageError(f"params.n={params.n} does not match generator n={n}")
    if params.mode == "fixed-mu":
        mu = params.mu
        return per_weight(mu) / tally.count[mu]
    eps = params.epsilon
    return math.fsum(pattern_probability(n, w, eps) * per_weight(w) for w in range(n + 1))


def equivocation_loss_oracle(G: GeneratorMatrix, params: ChannelParams, workers: int = 1) -> MetricResult:
    """Expected information leaked, E[|r| - rank(G_r)] in bits."""
    t0 = time.perf_counter()
    tally = weight_tally(G, workers)
    value = weighted_value(tally, params, tally.loss_sum)
    return MetricResult("equivocation-loss", "oracle", value, params, time.perf_counter() - t0)


def chi2_oracle(G: GeneratorMatrix, params: ChannelParams, workers: int = 1) -> MetricResult:
    """E[2^(|r| - rank(G_r))] - 1."""
    t0 = time.perf_counter()
    tally = weight_tally(G, workers)
    value = weighted_value(tally, params, lambda w: tally.pow_sum[w]) - 1.0
    return MetricResult("chi2", "oracle", value, params, time.perf_counter() - t0)


def expected_rank_oracle(G: GeneratorMatrix, params: ChannelParams) -> float:
    tally = weight_tally(G)
    return weighted_value(tally, params, lambda w: tally.rank_sum[w])


def conditional_entropy(G: GeneratorMatrix, revealed) -> float:
    """H(M | Z=z) for an observation revealing the given 1-based positions."""
    revealed = set(revealed)
    if not revealed <= set(range(1, G.n + 1)):
        raise UsageError("revealed positions must lie in 1..n")
    return float(G.k - len(revealed) + rank(G.submatrix(sorted(revealed))))


def total_variation_oracle(G: GeneratorMatrix, params: ChannelParams) -> MetricResult:
    """Total variation between p(M, Z) and p(M)p(Z), pattern by pattern.

    For a pattern r the eavesdropper sees z uniformly over the 2^R words
    spanned by the revealed columns of the stacked generator.  Given z, a
    message is either consistent (2^H of them, each with posterior 2^-H) or
    impossible.  The absolute differences are summed over both cases.
    """
    t0 = time.perf_counter()
    _check_n(G, MAX_TV_N)
    if G.kappa > MAX_TV_KAPPA:
        raise ResourceError(f"total variation needs kappa <= {MAX_TV_KAPPA}")
    if not G.is_full_rank():
        raise UsageError("total variation needs a full-rank generator")
    if params.n != G.n:
        raise UsageError(f"params.n={params.n} does not match generator n={G.n}")
    n, k = G.n, G.k
    aux_rows = complete_rows(G.rows(), n)
    # stacked generator as columns: low kappa bits from G, the rest from G'
    star_cols = [
        G.cols[j] | sum(((row >> j) & 1) << (G.kappa + a) for a, row in enumerate(aux_rows))
        for j in range(n)
    ]
    p_m = 2.0 ** -k
    terms = []
    for mask in range(1 << n):
        w = bin(mask).count("1")
        if params.mode == "fixed-mu":
            if w != params.mu:
                continue
            pr = 1.0 / math.comb(n, w)
        else:
            pr = pattern_probability(n, w, params.epsilon)
        if pr == 0.0:
            continue
        sel = [j for j in range(n) if (mask >> j) & 1]
        r_base = rank([G.cols[j] for j in sel])
        r_all = rank([star_cols[j] for j in sel])
        h = k - r_all + r_base  # conditional entropy of M given such a z
        p_z = pr * 2.0 ** -r_all
        consistent = 2 ** h
        per_z = consistent * abs(p_z / consistent - p_m * p_z) + (2 ** k - consistent) * p_m * p_z
        terms.append((2 ** r_all) * per_z)
    value = 0.5 * math.fsum(terms)
    return MetricResult("total-variation", "oracle", value, params, time.perf_counter() - t0)
