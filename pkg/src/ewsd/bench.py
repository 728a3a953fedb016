"""Runtime measurements for the enumeration and subspace paths."""

from __future__ import annotations

import statistics
import timeit
from dataclasses import dataclass

import numpy as np

from ewsd.codes import from_generator
from ewsd.gf2core import GeneratorMatrix
from ewsd.oracle import ChannelParams, chi2_oracle, equivocation_loss_oracle
from ewsd.sdmetrics import chi2_sd, equivocation_loss_sd


def bench_generator(kappa: int, n: int) -> GeneratorMatrix:
    """Columns cycle through the nonzero vectors 1, 2, ..., 2^kappa - 1."""
    return GeneratorMatrix(kappa, tuple((i % ((1 << kappa) - 1)) + 1 for i in range(n)))


@dataclass
class BenchRow:
    kappa: int
    n: int
    method: str
    metric: str
    median_runtime_ms: float


def _time(fn, repeats: int) -> float:
    """Median per-call milliseconds; fast calls are looped until a sample
    lasts at least 0.2 s so timer noise stays small."""
    timer = timeit.Timer(fn)
    loops, _ = timer.autorange()
    runs = timer.repeat(repeat=repeats, number=loops)
    return statistics.median(runs) / loops * 1e3


def run_bench(kappas, ns, epsilon: float = 0.3, repeats: int = 3, metrics=("equivocation", "chi2")) -> list[BenchRow]:
    rows = []
    for kappa in kappas:
        for n in ns:
            G = bench_generator(kappa, n)
            q = from_generator(G)
            params = ChannelParams.eps(n, epsilon)
            for metric in metrics:
                if metric == "equivocation":
                    oracle_fn, sd_fn = equivocation_loss_oracle, equivocation_loss_sd
                else:
                    oracle_fn, sd_fn = chi2_oracle, chi2_sd
                rows.append(BenchRow(kappa, n, "oracle", metric, _time(lambda: oracle_fn(G, params), repeats)))
                rows.append(BenchRow(kappa, n, "subspace", metric, _time(lambda: sd_fn(q, params), repeats)))
    return rows


def log2_slope(ns, times_ms) -> float:
    """Least-squares slope of log2(runtime) against n."""
    return float(np.polyfit(np.asarray(ns, float), np.log2(np.asarray(times_ms, float)), 1)[0])


def crossover_summary(rows: list[BenchRow]) -> list[dict]:
    """Per (kappa, metric): oracle slope, subspace spread, and the smallest n
    from which the subspace path stays faster."""
    out = []
    keys = sorted({(r.kappa, r.metric) for r in rows})
    for kappa, metric in keys:
        sel = [r for r in rows if r.kappa == kappa and r.metric == metric]
        ns = sorted({r.n for r in sel})
        orc = {r.n: r.median_runtime_ms for r in sel if r.method == "oracle"}
        sub = {r.n: r.median_runtime_ms for r in sel if r.method == "subspace"}
        crossover = None
        for n in reversed(ns):
            if sub[n] < orc[n]:
                crossover = n
            else:
                break
        out.append({
            "kappa": kappa,
            "metric": metric,
            "oracle_log2_slope": log2_slope(ns, [orc[n] for n in ns]) if len(ns) > 1 else None,
            "subspace_max_over_min": max(sub.values()) / min(sub.values()),
            "crossover_n": crossover,
        })
    return out
