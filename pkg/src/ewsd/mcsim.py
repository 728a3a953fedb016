"""Monte Carlo estimates over a simulated erasure channel.

The leaked information for one observation depends only on which positions
were revealed, so the estimators sample erasure patterns and never draw
messages.  The encoder and channel are provided for end-to-end experiments.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ewsd.errors import UsageError
from ewsd.gf2core import GeneratorMatrix, complete_rows, rank, selection_ranks

_STREAMS = 16
_BATCH = 1 << 14


class CosetEncoder:
    """x = [m m'] G*, where G* stacks the auxiliary rows G' above G.

    m (k bits) picks the coset, m' (kappa bits) is uniform padding.
    """

    def __init__(self, G: GeneratorMatrix, aux_rows: Sequence[int] | None = None):
        base = G.rows()
        if rank(base) != G.kappa:
            raise UsageError("the base generator must have full rank")
        if aux_rows is None:
            aux_rows = complete_rows(base, G.n)
        aux_rows = [int(r) for r in aux_rows]
        if len(aux_rows) + G.kappa != G.n or rank(aux_rows + base) != G.n:
            raise UsageError("auxiliary rows must complete G to a basis of GF(2)^n")
        self.G = G
        self.aux_rows = aux_rows
        self.rows = aux_rows + base  # message rows first

    @property
    def n(self) -> int:
        return self.G.n

    @property
    def k(self) -> int:
        return len(self.aux_rows)

    @property
    def kappa(self) -> int:
        return self.G.kappa

    def encode_int(self, m: int, m_prime: int) -> int:
        word = 0
        bits = m | (m_prime << self.k)
        for i, row in enumerate(self.rows):
            if (bits >> i) & 1:
                word ^= row
        return word


def _bits_to_int(bits: Sequence[int], width: int, what: str) -> int:
    if len(bits) != width:
        raise UsageError(f"{what} must have {width} bits, got {len(bits)}")
    return sum((int(b) & 1) << i for i, b in enumerate(bits))


def encode(m: Sequence[int], m_prime: Sequence[int], enc: CosetEncoder) -> np.ndarray:
    """Codeword bits (position 1 first) for message m and padding m'."""
    word = enc.encode_int(_bits_to_int(m, enc.k, "m"), _bits_to_int(m_prime, enc.kappa, "m'"))
    return np.array([(word >> j) & 1 for j in range(enc.n)], dtype=np.int8)


@dataclass(frozen=True)
class Observation:
    z: tuple  # 0, 1 or "?" per position
    revealed: frozenset  # 1-based positions with z != "?"


def erase(x: Sequence[int], epsilon: float, rng: np.random.Generator) -> Observation:
    if not 0.0 <= epsilon <= 1.0:
        raise UsageError(f"epsilon must be in [0, 1], got {epsilon}")
    gone = rng.random(len(x)) < epsilon
    z = tuple("?" if g else int(b) for b, g in zip(x, gone))
    revealed = frozenset(j + 1 for j, g in enumerate(gone) if not g)
    return Observation(z, revealed)


@dataclass
class Estimate:
    metric: str
    estimate: float
    std_error: float
    trials: int
    seed: int
    epsilon: float
    runtime: float

    def to_json(self) -> dict:
        return {
            "metric": self.metric,
            "method": "montecarlo",
            "value": self.estimate,
            "std_error": self.std_error,
            "trials": self.trials,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "runtime_ms": self.runtime * 1e3,
        }


def _stream_sums(args):
    cols, kappa, n, epsilon, count, seed_seq, metric = args
    rng = np.random.default_rng(seed_seq)
    weights = 1 << np.arange(n, dtype=np.int64)
    total = 0.0
    total_sq = 0.0
    left = count
    while left > 0:
        b = min(_BATCH, left)
        left -= b
        revealed = rng.random((b, n)) >= epsilon
        masks = revealed.astype(np.int64) @ weights
        deficit = revealed.sum(axis=1) - selection_ranks(cols, masks, kappa)
        vals = deficit.astype(float) if metric == "equivocation" else np.exp2(deficit) - 1.0
        total += math.fsum(vals.tolist())
        total_sq += math.fsum((vals * vals).tolist())
    return total, total_sq


def _estimate(G: GeneratorMatrix, epsilon: float, trials: int, seed: int, metric: str, workers: int) -> Estimate:
    if trials < 1:
        raise UsageError("trials must be at least 1")
    if not 0.0 <= epsilon <= 1.0:
        raise UsageError(f"epsilon must be in [0, 1], got {epsilon}")
    t0 = time.perf_counter()
    seqs = np.random.SeedSequence(seed).spawn(_STREAMS)
    per = [trials // _STREAMS + (1 if i < trials % _STREAMS else 0) for i in range(_STREAMS)]
    jobs = [(G.cols, G.kappa, G.n, epsilon, c, s, metric) for c, s in zip(per, seqs) if c]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_stream_sums, jobs))
    else:
        parts = [_stream_sums(j) for j in jobs]
    s1 = math.fsum(p[0] for p in parts)
    s2 = math.fsum(p[1] for p in parts)
    mean = s1 / trials
    if trials > 1:
        var = max(0.0, (s2 - trials * mean * mean) / (trials - 1))
        se = math.sqrt(var / trials)
    else:
        se = math.inf
    return Estimate(metric, mean, se, trials, seed, epsilon, time.perf_counter() - t0)


def estimate_equivocation(G: GeneratorMatrix, epsilon: float, trials: int, seed: int, workers: int = 1) -> Estimate:
    """Sample mean of |r| - rank(G_r) over simulated erasure patterns."""
    return _estimate(G, epsilon, trials, seed, "equivocation", workers)


def estimate_chi2(G: GeneratorMatrix, epsilon: float, trials: int, seed: int, workers: int = 1) -> Estimate:
    """Sample mean of 2^(|r| - rank(G_r)) - 1."""
    return _estimate(G, epsilon, trials, seed, "chi2", workers)
