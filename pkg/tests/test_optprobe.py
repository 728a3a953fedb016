import math

import numpy as np
import pytest

from conftest import random_simplex_point
from ewsd.codes import rho, subspace_exclusion, uniform_fraction
from ewsd.errors import UsageError
from ewsd.oracle import ChannelParams
from ewsd.optprobe import (
    ConstraintSet,
    check_constraints,
    chi2_batch,
    chi2_global_probe,
    chi2_zero_column_derivative,
    directional_fd,
    feasible_mask,
    gradient_chi2,
    gradient_equivocation,
    gradient_equivocation_uniform,
    min_dist_threshold,
    stationarity_probe,
    xi_inverse,
    xi_inverse_array,
    xi_transform,
    zero_column_derivative,
)
from ewsd.sdmetrics import chi2_sd, equivocation_loss_sd


def loss_fn(n, eps):
    p = ChannelParams.eps(n, eps)
    return lambda x: equivocation_loss_sd(x, p).value


def chi2_fn(n, eps):
    p = ChannelParams.eps(n, eps)
    return lambda x: chi2_sd(x, p).value


def fd_gradient(f, q, step=1e-6):
    out = np.zeros(q.size)
    for i in range(q.size):
        e = np.zeros(q.size)
        e[i] = 1.0
        out[i] = directional_fd(f, q, e, step)
    return out


@pytest.mark.parametrize("metric", ["equivocation", "chi2"])
def test_gradients_match_finite_differences(metric):
    rng = np.random.default_rng(4 if metric == "equivocation" else 5)
    worst = 0.0
    for _ in range(50):
        kappa = int(rng.integers(1, 5))
        n = int(rng.integers(2, 12))
        eps = float(rng.uniform(0.1, 0.9))
        q = random_simplex_point(rng, 1 << kappa)
        if metric == "equivocation":
            g, f = gradient_equivocation(q, n, eps), loss_fn(n, eps)
        else:
            g, f = gradient_chi2(q, n, eps), chi2_fn(n, eps)
        fd = fd_gradient(f, q)
        scale = max(np.max(np.abs(fd)), 1e-3)
        worst = max(worst, np.max(np.abs(g - fd)) / scale)
    assert worst <= 1e-5


@pytest.mark.parametrize("kappa", [2, 3, 4])
def test_uniform_gradient_closed_form(kappa):
    n, eps = (1 << kappa) - 1, 0.5
    g = gradient_equivocation(uniform_fraction(kappa).q, n, eps)
    assert np.allclose(g[1:], g[1], rtol=1e-12)
    assert g[1] == pytest.approx(gradient_equivocation_uniform(kappa, n, eps), rel=1e-10)


def test_gradient_domain():
    with pytest.raises(UsageError):
        gradient_equivocation(uniform_fraction(2).q, 3, 0.0)
    with pytest.raises(UsageError):
        gradient_chi2(uniform_fraction(2).q, 3, 1.0)


def _toward_zero_column(q):
    e0 = np.zeros(q.size)
    e0[0] = 1.0
    return q - e0


def test_zero_column_example():
    q = np.array([0.5, 0.5, 0.0, 0.0])
    rep = zero_column_derivative(q, 4, 0.3)
    assert rep.value < 0
    assert rep.value == pytest.approx(directional_fd(loss_fn(4, 0.3), q, _toward_zero_column(q)), rel=1e-6)
    # dimension-0 term in closed form
    t = 4 * math.log(0.3)
    assert rep.per_dimension[0] == pytest.approx(t * 0.5 * math.exp(t * 0.5), rel=1e-12)


def test_zero_column_random():
    rng = np.random.default_rng(9)
    for _ in range(60):
        kappa = int(rng.integers(1, 5))
        n = int(rng.integers(2, 11))
        eps = float(rng.uniform(0.1, 0.9))
        q = random_simplex_point(rng, 1 << kappa)
        d = _toward_zero_column(q)
        rep = zero_column_derivative(q, n, eps)
        assert rep.value < 0 and max(rep.per_dimension) <= 1e-12
        assert rep.value == pytest.approx(directional_fd(loss_fn(n, eps), q, d), rel=1e-5, abs=1e-9)
        rep = chi2_zero_column_derivative(q, n, eps)
        assert rep.value < 0 and max(rep.per_dimension) <= 1e-12
        assert rep.value == pytest.approx(directional_fd(chi2_fn(n, eps), q, d), rel=1e-5, abs=1e-9)


def test_zero_column_edges():
    for q0 in (0.0, 1.0):
        q = np.array([q0, 1 - q0, 0.0, 0.0])
        with pytest.raises(UsageError):
            zero_column_derivative(q, 4, 0.3)
        with pytest.raises(UsageError):
            chi2_zero_column_derivative(q, 4, 0.3)


@pytest.mark.parametrize("kappa", range(1, 7))
def test_xi_transform_properties(kappa):
    rng = np.random.default_rng(kappa)
    size = 1 << kappa
    for _ in range(20):
        q = random_simplex_point(rng, size, pin_zero=True)
        q2 = random_simplex_point(rng, size, pin_zero=True)
        xi = xi_transform(q).xi
        assert xi.size == size - 1 and xi.min() >= -1e-12 and xi.max() <= 1 + 1e-12
        assert math.fsum(xi) == pytest.approx(2 ** (kappa - 1) - 1, abs=1e-10)
        assert np.max(np.abs(xi_inverse_array(xi) - q)) <= 1e-10
        lhs = np.sum((xi - xi_transform(q2).xi) ** 2)
        rhs = 2 ** (kappa - 2) * np.sum((q - q2) ** 2)
        assert lhs == pytest.approx(rhs, rel=1e-10)


@pytest.mark.parametrize("kappa", range(2, 7))
def test_xi_of_constructions(kappa):
    size = 1 << kappa
    xi = xi_transform(uniform_fraction(kappa).q)
    assert xi.kappa == kappa
    assert np.allclose(xi.xi, (2 ** (kappa - 1) - 1) / (size - 1), atol=1e-14)
    xi = xi_transform(subspace_exclusion(kappa, kappa - 1).q).xi
    assert np.isclose(xi.min(), 0.0, atol=1e-14) and np.sum(np.isclose(xi, 0.0, atol=1e-14)) == 1
    assert np.allclose(np.sort(xi)[1:], 0.5, atol=1e-14)
    back = xi_inverse(xi)
    assert back.reduced and np.allclose(back.q, subspace_exclusion(kappa, kappa - 1).q, atol=1e-12)


def test_constraints():
    q = subspace_exclusion(3, 1).q
    _, r = rho(3, 1)
    assert check_constraints(q, ConstraintSet(radius=r, min_dist_u=1)) == []
    assert check_constraints(uniform_fraction(3).q, ConstraintSet(radius=r)) == ["radius"]
    assert "zero-column" in check_constraints(np.full(8, 1 / 8), ConstraintSet())
    assert "nonnegativity" in check_constraints(np.array([0, 1.5, -0.5, 0]), ConstraintSet())
    assert min_dist_threshold(3, 2) == 0.0
    X = np.stack([q, uniform_fraction(3).q, subspace_exclusion(3, 2).q])
    assert feasible_mask(X, ConstraintSet()).all()
    assert list(feasible_mask(X, ConstraintSet(radius=r))) == [True, False, False]


@pytest.mark.parametrize("kappa", [2, 3, 4])
@pytest.mark.parametrize("eps", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("metric", ["equivocation", "chi2"])
def test_uniform_code_is_stationary(kappa, eps, metric):
    rep = stationarity_probe(uniform_fraction(kappa).q, (1 << kappa) - 1, eps, metric=metric, seed=1)
    assert rep.projected_gradient_norm <= 1e-9
    assert rep.min_curvature > 0


def test_random_interior_point_not_stationary():
    rng = np.random.default_rng(0)
    norms = []
    for _ in range(10):
        q = random_simplex_point(rng, 8, pin_zero=True)
        norms.append(stationarity_probe(q, 7, 0.5, directions=4).projected_gradient_norm)
    assert np.median(norms) > 1e-3


def test_probe_rejects_infeasible_point():
    with pytest.raises(UsageError):
        stationarity_probe(np.full(8, 1 / 8), 7, 0.5)


def test_probe_is_deterministic():
    q = subspace_exclusion(3, 2).q
    cons = ConstraintSet(radius=rho(3, 2)[1])
    a = stationarity_probe(q, 4, 0.5, cons, seed=3)
    b = stationarity_probe(q, 4, 0.5, cons, seed=3)
    assert a == b


def test_chi2_batch_matches_scalar():
    rng = np.random.default_rng(6)
    Q = np.stack([random_simplex_point(rng, 16) for _ in range(12)])
    want = [chi2_sd(x, ChannelParams.eps(9, 0.35)).value for x in Q]
    assert np.allclose(chi2_batch(Q, 9, 0.35), want, rtol=1e-12, atol=1e-14)


def test_global_probe_small_runs():
    rep = chi2_global_probe(3, 7, 0.5, "uniform", samples=500, seed=1)
    assert rep.violations == 0 and rep.samples >= 500 and rep.min_margin >= 0
    rep = chi2_global_probe(3, 4, 0.5, "sec", u=2, samples=500, seed=1)
    assert rep.violations == 0
    loose = chi2_global_probe(3, 6, 0.5, "sec", u=1, samples=2000, seed=1, enforce_min_dist=False)
    assert loose.violations > 0


def test_global_probe_worker_invariance():
    a = chi2_global_probe(3, 7, 0.5, "uniform", samples=400, seed=2, workers=1)
    b = chi2_global_probe(3, 7, 0.5, "uniform", samples=400, seed=2, workers=2)
    assert a == b


def test_global_probe_arguments():
    with pytest.raises(UsageError):
        chi2_global_probe(3, 7, 0.5, "sec")
    with pytest.raises(UsageError):
        chi2_global_probe(3, 7, 0.5, "bogus")
