"""Command-line entry point: ``ewsd <command> [flags]``.

Exit codes: 0 success, 1 internal failure (or a failed verification),
2 invalid input, 3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import sys
from pathlib import Path

import numpy as np

from ewsd import codes, mcsim, optprobe, oracle, sdmetrics
from ewsd.bench import crossover_summary, run_bench
from ewsd.errors import EwsdError, ResourceError, UsageError
from ewsd.gf2core import GeneratorMatrix
from ewsd.lattice import FULL_LATTICE_MAX_KAPPA, enumerate_subspaces, gaussian_binomial


def _default_parallel() -> int:
    raw = os.environ.get("EWSD_PARALLEL", "1")
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"EWSD_PARALLEL must be an integer, got {raw!r}")
    if value < 1:
        raise UsageError("EWSD_PARALLEL must be at least 1")
    return value


def _emit(doc, out=None):
    text = json.dumps(doc, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def _int_range(text: str) -> list[int]:
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B, got {text!r}")


# ---------------------------------------------------------------- analyze


def _load_input(args):
    if bool(args.generator) == bool(args.q):
        raise UsageError("give exactly one of --generator or --q")
    if args.generator:
        G = GeneratorMatrix.from_text(Path(args.generator).read_text())
        return G, codes.from_generator(G)
    code = codes.load_q(args.q)
    n = args.n if args.n is not None else code.n
    if n is None:
        raise UsageError("--q input needs --n")
    return None, codes.CodeDefinition(code.kappa, code.q, n=n)


def cmd_analyze(args) -> int:
    G, code = _load_input(args)
    n = G.n if G is not None else code.n
    if (args.epsilon is None) == (args.mu is None):
        raise UsageError("give exactly one of --epsilon or --mu")
    params = oracle.ChannelParams.eps(n, args.epsilon) if args.epsilon is not None else oracle.ChannelParams.fixed_mu(n, args.mu)

    metric = args.metric
    if args.method == "all":
        methods = ["oracle"] if metric == "tv" else ["oracle", "subspace"]
        if metric != "tv" and params.mode == "fixed-epsilon" and args.seed is not None:
            methods.append("montecarlo")
    else:
        methods = [args.method]
    if metric == "tv" and methods != ["oracle"]:
        raise UsageError("total variation is available from the oracle only")

    def generator():
        if G is not None:
            return G
        return codes.to_generator(code, n)

    results = []
    for method in methods:
        if method == "oracle":
            fn = {
                "equivocation": oracle.equivocation_loss_oracle,
                "chi2": oracle.chi2_oracle,
            }.get(metric)
            if fn is None:
                res = oracle.total_variation_oracle(generator(), params)
            else:
                res = fn(generator(), params, workers=args.parallel)
            results.append(res.to_json())
        elif method == "subspace":
            if metric == "equivocation":
                res = sdmetrics.equivocation_loss_sd(code, params)
            else:
                res = sdmetrics.chi2_sd(code, params)
            results.append(res.to_json())
        else:
            if params.mode != "fixed-epsilon":
                raise UsageError("Monte Carlo runs in fixed-epsilon mode only")
            if args.seed is None:
                raise UsageError("Monte Carlo needs --seed")
            est_fn = mcsim.estimate_equivocation if metric == "equivocation" else mcsim.estimate_chi2
            est = est_fn(generator(), params.epsilon, args.trials, args.seed, workers=args.parallel)
            doc = est.to_json()
            doc["metric"] = "equivocation-loss" if metric == "equivocation" else "chi2"
            doc["n"] = n
            results.append(doc)
    deltas = []
    for i in range(len(results)):
        for j in range(i + 1, len(results)):
            deltas.append({
                "a": results[i]["method"],
                "b": results[j]["method"],
                "delta": abs(results[i]["value"] - results[j]["value"]),
            })
    _emit({"config": _config(args), "results": results, "deltas": deltas}, args.output)
    return 0


# ---------------------------------------------------------------- construct


def cmd_construct(args) -> int:
    if args.type == "uniform":
        code = codes.uniform_fraction(args.kappa)
    else:
        if args.u is None:
            raise UsageError("--type sec needs --u")
        if not 0 <= args.u < args.kappa:
            raise UsageError(f"--u must be in [0, kappa-1], got {args.u}")
        code = codes.subspace_exclusion(args.kappa, args.u)
    if args.emit_generator:
        text = codes.to_generator(code).to_text()
    else:
        text = json.dumps(code.to_json(), indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------- verify


def _random_realizable(rng: random.Random, kappa: int, n: int) -> GeneratorMatrix:
    return GeneratorMatrix(kappa, tuple(rng.randrange(1 << kappa) for _ in range(n)))


def run_verify(kappa_max: int, n_max: int, samples: int, seed: int, k_override: dict | None = None) -> dict:
    rng = random.Random(seed)
    suites: dict[str, dict] = {}

    def record(name: str, ok: bool):
        s = suites.setdefault(name, {"checks": 0, "failures": 0})
        s["checks"] += 1
        s["failures"] += 0 if ok else 1

    for _ in range(samples):
        kappa = rng.randint(2, kappa_max)
        n = rng.randint(max(kappa, 2), n_max)
        G = _random_realizable(rng, kappa, n)
        q = codes.from_generator(G)
        tally = oracle.weight_tally(G)
        for eps in (0.1, 0.3, 0.5, 0.7, 0.9):
            p = oracle.ChannelParams.eps(n, eps)
            a = oracle.weighted_value(tally, p, tally.loss_sum)
            b = sdmetrics.equivocation_loss_sd(q, p, K_override=k_override).value
            record("equivocation-epsilon", abs(a - b) <= 1e-9)
            a = oracle.weighted_value(tally, p, lambda w: tally.pow_sum[w]) - 1.0
            record("chi2-epsilon", abs(a - sdmetrics.chi2_sd(q, p).value) <= 1e-9)
        for mu in range(1, n + 1):
            p = oracle.ChannelParams.fixed_mu(n, mu)
            a = oracle.weighted_value(tally, p, tally.loss_sum)
            b = sdmetrics.equivocation_loss_sd(q, p, K_override=k_override).value
            record("equivocation-mu", abs(a - b) <= 1e-9)
            a = oracle.weighted_value(tally, p, lambda w: tally.pow_sum[w]) - 1.0
            record("chi2-mu", abs(a - sdmetrics.chi2_sd(q, p).value) <= 1e-9)

    for a in range(11):
        record("eta-alternating-sum", sum(sdmetrics.eta_prime(a, i) for i in range(a + 1)) == (1 if a == 0 else 0))
        for b in range(1, a + 1):
            lhs = sum(sdmetrics.eta_prime(a, i) for i in range(b, a + 1))
            record("eta-tail-sum", lhs == 2 ** (a - b) * sdmetrics.eta_prime(a - 1, b - 1))
        for b in range(a + 1):
            lhs = sum(gaussian_binomial(a, i) * sdmetrics.eta_prime(i, b) for i in range(b, a + 1))
            record("eta-inverse", lhs == (1 if a == b else 0))
        if a >= 1:
            record("eta-weighted", sum(j * sdmetrics.eta_prime(a, j) for j in range(1, a + 1)) == sdmetrics.K(a))
    for kappa in range(1, 11):
        for d in range(kappa + 1):
            record("gamma-collapse", sdmetrics.gamma_sum(kappa, d) == sdmetrics.gamma_closed(kappa, d))
    for kappa in range(1, min(6, FULL_LATTICE_MAX_KAPPA) + 1):
        for d in range(kappa + 1):
            record("lattice-counts", len(enumerate_subspaces(kappa, d)) == gaussian_binomial(kappa, d))
    for _ in range(samples):
        kappa = rng.randint(2, min(kappa_max, 4))
        x = np.array([rng.random() for _ in range(1 << kappa)])
        x /= x.sum()
        eps = rng.choice([0.1, 0.3, 0.5, 0.7, 0.9])
        prof = sdmetrics.subspace_profiles(x, oracle.ChannelParams.eps(rng.randint(2, n_max), eps))
        record("psi-nonnegative", min(p.psi for p in prof.values()) >= -1e-12)

    passed = all(s["failures"] == 0 for s in suites.values())
    return {"passed": passed, "suites": suites}


def cmd_verify(args) -> int:
    if args.kappa_max > 6 or args.kappa_max < 2:
        raise ResourceError("--kappa-max must be between 2 and 6")
    if args.n_max > 16:
        raise ResourceError("--n-max must be at most 16 for the verification suites")
    override = {3: args.mutate_k3} if args.mutate_k3 is not None else None
    report = run_verify(args.kappa_max, args.n_max, args.samples, args.seed, override)
    report["config"] = _config(args)
    _emit(report, args.output)
    return 0 if report["passed"] else 1


# ---------------------------------------------------------------- probe


def cmd_probe(args) -> int:
    if args.construction == "uniform":
        code = codes.uniform_fraction(args.kappa)
        u = 0
    else:
        if args.u is None:
            raise UsageError("--construction sec needs --u")
        code = codes.subspace_exclusion(args.kappa, args.u)
        u = args.u
    n = args.n if args.n is not None else code.n
    if args.mode == "stationarity":
        _, radius = codes.rho(args.kappa, u)
        cons = optprobe.ConstraintSet(radius=radius if u > 0 else None)
        report = optprobe.stationarity_probe(
            code.q, n, args.epsilon, cons, metric=args.metric, directions=args.directions, seed=args.seed
        ).to_json()
        report["construction"] = code.name
    else:
        if args.metric != "chi2":
            raise UsageError("sphere sampling is implemented for the chi2 metric")
        report = optprobe.chi2_global_probe(
            args.kappa,
            n,
            args.epsilon,
            args.construction,
            u=u if args.construction == "sec" else None,
            samples=args.samples,
            seed=args.seed,
            enforce_min_dist=not args.no_min_dist,
            workers=args.parallel,
        ).to_json()
    report["config"] = _config(args)
    _emit(report, args.output)
    return 0


# ---------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    G = GeneratorMatrix.from_text(Path(args.generator).read_text())
    fn = mcsim.estimate_equivocation if args.metric == "equivocation" else mcsim.estimate_chi2
    est = fn(G, args.epsilon, args.trials, args.seed, workers=args.parallel)
    doc = est.to_json()
    doc["config"] = _config(args)
    _emit(doc, args.output)
    return 0


# ---------------------------------------------------------------- bench


def cmd_bench(args) -> int:
    kappas, ns = args.kappa_range, args.n_range
    if max(ns) > oracle.MAX_ORACLE_N:
        raise ResourceError(f"bench n must be <= {oracle.MAX_ORACLE_N}")
    if max(kappas) > FULL_LATTICE_MAX_KAPPA:
        raise ResourceError(f"bench kappa must be <= {FULL_LATTICE_MAX_KAPPA}")
    metrics = ("equivocation", "chi2") if args.metric == "both" else (args.metric,)
    rows = run_bench(kappas, ns, args.epsilon, args.repeats, metrics)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["kappa", "n", "method", "metric", "median_runtime_ms"])
    for r in rows:
        writer.writerow([r.kappa, r.n, r.method, r.metric, f"{r.median_runtime_ms:.6f}"])
    if args.output:
        Path(args.output).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    summary = {"config": _config(args), "crossover": crossover_summary(rows)}
    if args.summary:
        _emit(summary, args.summary)
    else:
        print(json.dumps(summary, indent=2), file=sys.stderr)
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ewsd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--parallel", type=int, default=None, help="worker processes (default: $EWSD_PARALLEL or 1)")
        p.add_argument("--output", "-o", default=None, help="write to this file instead of stdout")

    p = sub.add_parser("analyze", help="compute a secrecy metric")
    p.add_argument("--generator", help="generator matrix text file")
    p.add_argument("--q", help="q-vector JSON file")
    p.add_argument("--n", type=int, help="blocklength for --q input")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--mu", type=int)
    p.add_argument("--metric", choices=["equivocation", "chi2", "tv"], default="equivocation")
    p.add_argument("--method", choices=["oracle", "subspace", "montecarlo", "all"], default="all")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int)
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("construct", help="write a named construction")
    p.add_argument("--kappa", type=int, required=True)
    p.add_argument("--type", choices=["uniform", "sec"], required=True)
    p.add_argument("--u", type=int)
    p.add_argument("--emit-generator", action="store_true")
    common(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify", help="run the equivalence and identity suites")
    p.add_argument("--kappa-max", type=int, default=4)
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mutate-k3", type=int, default=None, help=argparse.SUPPRESS)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("probe", help="optimality probes")
    p.add_argument("--construction", choices=["uniform", "sec"], required=True)
    p.add_argument("--u", type=int)
    p.add_argument("--kappa", type=int, required=True)
    p.add_argument("--n", type=int, help="blocklength (default: natural)")
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--metric", choices=["equivocation", "chi2"], default="equivocation")
    p.add_argument("--mode", choices=["stationarity", "sphere-sample"], default="stationarity")
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--directions", type=int, default=64)
    p.add_argument("--no-min-dist", action="store_true", help="drop the distance-from-first-exclusion-codes constraint")
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("simulate", help="Monte Carlo estimate")
    p.add_argument("--generator", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--metric", choices=["equivocation", "chi2"], default="equivocation")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, required=True)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="runtime scaling of both paths")
    p.add_argument("--kappa-range", type=_int_range, default=_int_range("4"))
    p.add_argument("--n-range", type=_int_range, default=_int_range("10..18"))
    p.add_argument("--epsilon", type=float, default=0.3)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--metric", choices=["equivocation", "chi2", "both"], default="both")
    p.add_argument("--summary", help="write the crossover summary JSON here (default: stderr)")
    common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.parallel is None:
            args.parallel = _default_parallel()
        if args.parallel < 1:
            raise UsageError("--parallel must be at least 1")
        return args.func(args)
    except EwsdError as exc:
        print(f"ewsd: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"ewsd: error: {exc}", file=sys.stderr)
        return 2
    except MemoryError as exc:
        print(f"ewsd: error: out of memory: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001
        print(f"ewsd: internal error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
