import math
from itertools import product

import numpy as np
import pytest

from conftest import random_generator
from reference_data import EXAMPLE_PATTERN_ROWS
from ewsd.errors import ResourceError, UsageError
from ewsd.gf2core import GeneratorMatrix, rank
from ewsd.mcsim import CosetEncoder
from ewsd.oracle import (
    ChannelParams,
    chi2_oracle,
    conditional_entropy,
    equivocation_loss_oracle,
    expected_rank_oracle,
    pattern_table,
    total_variation_oracle,
    weight_tally,
)

EPS_GRID = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]


def naive_loss_and_chi2(G, eps):
    """Plain loop over masks with the scalar rank routine."""
    loss, chi = [], []
    for mask in range(1 << G.n):
        sel = [j + 1 for j in range(G.n) if (mask >> j) & 1]
        p = eps ** (G.n - len(sel)) * (1 - eps) ** len(sel)
        deficit = len(sel) - rank(G.submatrix(sel))
        loss.append(p * deficit)
        chi.append(p * 2 ** deficit)
    return math.fsum(loss), math.fsum(chi) - 1


def brute_tv(G, weight_of_pattern):
    """TV from the explicit joint law of (message, observation)."""
    enc = CosetEncoder(G)
    k, n = enc.k, enc.n
    joint = {}
    for mask in range(1 << n):
        pr = weight_of_pattern(bin(mask).count("1"))
        if pr == 0:
            continue
        for m, mp in product(range(1 << k), range(1 << G.kappa)):
            z = (mask, enc.encode_int(m, mp) & mask)
            joint[(m, z)] = joint.get((m, z), 0.0) + pr * 2.0 ** -(k + G.kappa)
    p_z = {}
    for (m, z), p in joint.items():
        p_z[z] = p_z.get(z, 0.0) + p
    total = []
    for z, pz in p_z.items():
        for m in range(1 << k):
            total.append(abs(joint.get((m, z), 0.0) - pz * 2.0 ** -k))
    return 0.5 * math.fsum(total)


def test_pattern_table_example(example_G):
    rows = pattern_table(example_G, 0.2)
    assert len(rows) == 32
    for got, (pat, r, p) in zip(rows, EXAMPLE_PATTERN_ROWS):
        assert got.pattern == pat and got.rank == r
        assert got.probability == pytest.approx(p, abs=1e-12)


def test_pattern_probabilities_sum_to_one():
    rng = np.random.default_rng(3)
    for _ in range(20):
        G = random_generator(rng, int(rng.integers(1, 5)), int(rng.integers(1, 11)))
        eps = float(rng.random())
        assert math.fsum(r.probability for r in pattern_table(G, eps)) == pytest.approx(1.0, abs=1e-12)


def test_worked_values(example_G):
    p = ChannelParams.eps(5, 0.2)
    assert equivocation_loss_oracle(example_G, p).value == pytest.approx(1.44, abs=1e-12)
    assert chi2_oracle(example_G, p).value == pytest.approx(1.952, abs=1e-12)
    assert expected_rank_oracle(example_G, p) == pytest.approx(2.56, abs=1e-12)


def test_edge_epsilons(example_G):
    assert equivocation_loss_oracle(example_G, ChannelParams.eps(5, 0.0)).value == 2.0
    assert equivocation_loss_oracle(example_G, ChannelParams.eps(5, 1.0)).value == 0.0
    assert chi2_oracle(example_G, ChannelParams.eps(5, 1.0)).value == 0.0
    assert chi2_oracle(example_G, ChannelParams.eps(5, 0.0)).value == 3.0


def test_matches_naive_loop():
    rng = np.random.default_rng(11)
    for _ in range(30):
        G = random_generator(rng, int(rng.integers(1, 5)), int(rng.integers(1, 10)))
        eps = float(rng.choice(EPS_GRID))
        loss, chi = naive_loss_and_chi2(G, eps)
        p = ChannelParams.eps(G.n, eps)
        assert equivocation_loss_oracle(G, p).value == pytest.approx(loss, abs=1e-12)
        assert chi2_oracle(G, p).value == pytest.approx(chi, abs=1e-12)


def test_ranges_and_monotonicity():
    rng = np.random.default_rng(5)
    for _ in range(25):
        kappa = int(rng.integers(1, 5))
        G = random_generator(rng, kappa, int(rng.integers(kappa, 11)))
        k = G.n - kappa
        losses, chis = [], []
        for eps in EPS_GRID:
            p = ChannelParams.eps(G.n, eps)
            losses.append(equivocation_loss_oracle(G, p).value)
            chis.append(chi2_oracle(G, p).value)
        assert min(losses) >= -1e-12
        assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
        assert all(b <= a + 1e-12 for a, b in zip(chis, chis[1:]))
        assert min(chis) >= -1e-12
        if G.is_full_rank():
            assert max(losses) <= k + 1e-12 and max(chis) <= 2 ** k - 1 + 1e-9


def test_fixed_mu_mixture_equals_fixed_epsilon():
    rng = np.random.default_rng(8)
    for _ in range(20):
        G = random_generator(rng, int(rng.integers(1, 5)), int(rng.integers(1, 11)))
        n = G.n
        for eps in (0.1, 0.5, 0.9):
            for fn in (equivocation_loss_oracle, chi2_oracle):
                mix = math.fsum(
                    math.comb(n, mu) * eps ** (n - mu) * (1 - eps) ** mu * fn(G, ChannelParams.fixed_mu(n, mu)).value
                    for mu in range(n + 1)
                )
                assert mix == pytest.approx(fn(G, ChannelParams.eps(n, eps)).value, abs=1e-10)


def test_fixed_mu_is_uniform_over_weight(example_G):
    rows = pattern_table(example_G, 0.5)
    weight2 = [r for r in rows if r.pattern.count("1") == 2]
    expected = sum(2 - r.rank for r in weight2) / len(weight2)
    assert equivocation_loss_oracle(example_G, ChannelParams.fixed_mu(5, 2)).value == pytest.approx(expected)


def test_worker_count_invariance():
    G = random_generator(np.random.default_rng(1), 4, 18)
    tallies = [weight_tally(G, workers=w) for w in (1, 3)]
    assert tallies[0] == tallies[1]


def test_channel_params_validation():
    with pytest.raises(UsageError):
        ChannelParams.eps(5, 1.5)
    with pytest.raises(UsageError):
        ChannelParams.fixed_mu(5, 6)
    with pytest.raises(UsageError):
        ChannelParams("fixed-epsilon", 5, epsilon=0.2, mu=1)
    with pytest.raises(UsageError):
        equivocation_loss_oracle(GeneratorMatrix(1, (1, 1)), ChannelParams.eps(3, 0.2))


def test_resource_cap():
    G = GeneratorMatrix(2, tuple([1] * 25))
    with pytest.raises(ResourceError):
        equivocation_loss_oracle(G, ChannelParams.eps(25, 0.5))
    with pytest.raises(ResourceError):
        total_variation_oracle(GeneratorMatrix(2, tuple([1, 2] * 9)), ChannelParams.eps(18, 0.5))


def test_json_shape(example_G):
    doc = chi2_oracle(example_G, ChannelParams.fixed_mu(5, 2)).to_json()
    assert set(doc) == {"metric", "method", "value", "n", "mu", "runtime_ms"}
    assert doc["metric"] == "chi2" and doc["method"] == "oracle"


def test_conditional_entropy(example_G):
    assert conditional_entropy(example_G, [1, 2, 3, 4, 5]) == 0
    assert conditional_entropy(example_G, []) == 2
    assert conditional_entropy(example_G, [1]) == 1
    with pytest.raises(UsageError):
        conditional_entropy(example_G, [6])


def test_total_variation_example(example_G):
    tv = lambda e: total_variation_oracle(example_G, ChannelParams.eps(5, e)).value
    assert tv(1.0) == 0.0
    assert tv(0.0) == pytest.approx(1 - 2 ** -2, abs=1e-12)
    assert tv(0.2) >= tv(0.8)


def test_total_variation_against_joint_distribution():
    rng = np.random.default_rng(21)
    checked = 0
    while checked < 12:
        kappa = int(rng.integers(1, 4))
        n = int(rng.integers(kappa + 1, 8))
        G = random_generator(rng, kappa, n)
        if not G.is_full_rank():
            continue
        eps = float(rng.choice(EPS_GRID))
        want = brute_tv(G, lambda w: eps ** (n - w) * (1 - eps) ** w)
        assert total_variation_oracle(G, ChannelParams.eps(n, eps)).value == pytest.approx(want, abs=1e-12)
        mu = int(rng.integers(0, n + 1))
        want = brute_tv(G, lambda w: 1 / math.comb(n, mu) if w == mu else 0.0)
        assert total_variation_oracle(G, ChannelParams.fixed_mu(n, mu)).value == pytest.approx(want, abs=1e-12)
        checked += 1


def test_total_variation_needs_full_rank():
    with pytest.raises(UsageError):
        total_variation_oracle(GeneratorMatrix(2, (1, 1, 1)), ChannelParams.eps(3, 0.5))
