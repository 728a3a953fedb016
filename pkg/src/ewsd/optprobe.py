"""Numerical evidence for the optimality of the uniform and exclusion codes.

Local claims are checked with a projected analytic gradient plus sampled
second differences along tangent directions.  Global claims are checked by
sampling the constrained feasible set and comparing.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from ewsd.codes import CodeDefinition, rho, subspace_exclusion, subspace_exclusion_from, uniform_fraction
from ewsd.errors import UsageError
from ewsd.gf2core import popcount_array
from ewsd.lattice import element_matrix, enumerate_subspaces, gaussian_binomial, hyperplanes
from ewsd.oracle import ChannelParams
from ewsd.sdmetrics import (
    K,
    _hyperplane_order,
    _phi_from_zeta,
    as_qvector,
    chi2_sd,
    equivocation_loss_sd,
    fwht,
    hyperplane_zetas,
    subspace_profiles,
)

_STREAMS = 16  # fixed so results do not depend on the worker count


def _check_eps(epsilon: float):
    if not 0.0 < epsilon < 1.0:
        raise UsageError(f"epsilon must lie strictly between 0 and 1, got {epsilon}")


# ---------------------------------------------------------------- gradients


def gradient_equivocation(q, n: int, epsilon: float) -> np.ndarray:
    """d loss / d q_i for every index, treating q as unconstrained."""
    _check_eps(epsilon)
    kappa, arr = as_qvector(q)
    if kappa > 6:
        raise UsageError("analytic equivocation gradient is limited to kappa <= 6")
    t = -n * math.log(epsilon)
    grad = np.zeros(1 << kappa)
    for delta in range(1, kappa + 1):
        mat = element_matrix(kappa, kappa - delta)
        phis = _phi_from_zeta(arr[mat].sum(axis=1), n, epsilon)
        np.add.at(grad, mat, (K(delta) * t * phis)[:, None])
    return grad


def gradient_equivocation_uniform(kappa: int, n: int, epsilon: float) -> float:
    """Closed form of every nonzero-index gradient component at the uniform code."""
    _check_eps(epsilon)
    size = (1 << kappa) - 1
    t = n * math.log(epsilon)
    return -t * sum(
        K(delta) * gaussian_binomial(kappa - 1, delta) * math.exp(t * ((1 << kappa) - (1 << (kappa - delta))) / size)
        for delta in range(1, kappa + 1)
    )


def _chi2_scale(kappa: int, n: int, epsilon: float) -> float:
    return math.exp(n * math.log(2.0 - epsilon) - kappa * math.log(2.0))


def gradient_chi2(q, n: int, epsilon: float) -> np.ndarray:
    """d chi2 / d q_i.  Hyperplane h contains i iff h.i is even, so the sum
    over containing hyperplanes is (total + transform) / 2."""
    _check_eps(epsilon)
    kappa, arr = as_qvector(q)
    ratio = epsilon / (2.0 - epsilon)
    spectrum = fwht(arr)
    size = 1 << kappa
    zetas = (math.fsum(arr) + spectrum) / 2.0
    weights = _phi_from_zeta(zetas, n, ratio)
    weights[0] = 0.0  # h = 0 is not a hyperplane
    per_index = (weights.sum() + fwht(weights)) / 2.0
    return _chi2_scale(kappa, n, epsilon) * (-n * math.log(ratio)) * per_index[:size]


# ---------------------------------------------------------------- zero column


@dataclass
class ZeroColumnReport:
    value: float
    per_dimension: list[float]


def _check_zero_column(q):
    kappa, arr = as_qvector(q)
    if not 0.0 < arr[0] < 1.0:
        raise UsageError("the zero-column direction needs 0 < q_0 < 1")
    return kappa, arr


def zero_column_derivative(q, n: int, epsilon: float) -> ZeroColumnReport:
    """Rate of change of the loss when zero columns are traded for a
    proportional share of the others (direction q - e_0).

    Computed per dimension from exact-span probabilities:
    n ln(eps) * sum_T (1 - zeta(T)) psi(T).
    """
    _check_eps(epsilon)
    kappa, arr = _check_zero_column(q)
    profiles = subspace_profiles(arr, ChannelParams.eps(n, epsilon))
    per_dim = [[] for _ in range(kappa)]
    for p in profiles.values():
        if p.subspace.dim < kappa:
            per_dim[p.subspace.dim].append((1.0 - p.zeta) * p.psi)
    scale = n * math.log(epsilon)
    omegas = [scale * math.fsum(v) for v in per_dim]
    return ZeroColumnReport(math.fsum(omegas), omegas)


def chi2_zero_column_derivative(q, n: int, epsilon: float) -> ZeroColumnReport:
    """Same direction for the chi-squared divergence; one term per hyperplane."""
    _check_eps(epsilon)
    kappa, arr = _check_zero_column(q)
    ratio = epsilon / (2.0 - epsilon)
    zetas = hyperplane_zetas(arr)
    terms = _chi2_scale(kappa, n, epsilon) * n * math.log(ratio) * (1.0 - zetas) * _phi_from_zeta(zetas, n, ratio)
    return ZeroColumnReport(math.fsum(terms.tolist()), terms.tolist())


def directional_fd(f, q: np.ndarray, direction: np.ndarray, step: float = 1e-6) -> float:
    return (f(q + step * direction) - f(q - step * direction)) / (2 * step)


# ---------------------------------------------------------------- xi transform


@dataclass
class XiVector:
    xi: np.ndarray

    @property
    def kappa(self) -> int:
        return (self.xi.size + 1).bit_length() - 1


def xi_transform(q) -> XiVector:
    """Column fraction of every hyperplane, in hyperplane order."""
    return XiVector(hyperplane_zetas(q))


def xi_inverse_array(xi) -> np.ndarray:
    """Undo ``xi_transform`` on the subspace q_0 = 0 (no validation).

    With total mass s the transform has W[h] = 2 xi_h - s for h != 0 and
    W[0] = s; requiring q_0 = 0 fixes s = 2 sum(xi) / (2^kappa - 2).
    """
    xi = np.asarray(xi.xi if isinstance(xi, XiVector) else xi, dtype=float)
    kappa = (xi.size + 1).bit_length() - 1
    if xi.size != (1 << kappa) - 1:
        raise UsageError("xi must have 2^kappa - 1 entries")
    size = 1 << kappa
    s = 2.0 * math.fsum(xi) / (size - 2) if size > 2 else 1.0
    spectrum = np.empty(size)
    spectrum[0] = s
    spectrum[_hyperplane_order(kappa)] = 2.0 * xi - s
    return fwht(spectrum) / size


def xi_inverse(xi) -> CodeDefinition:
    arr = xi_inverse_array(xi)
    arr[np.abs(arr) < 1e-12] = 0.0
    return CodeDefinition(arr.size.bit_length() - 1, arr, reduced=True)


# ---------------------------------------------------------------- constraints


@dataclass
class ConstraintSet:
    nonnegative: bool = True
    zero_column_pinned: bool = True
    radius: float | None = None  # distance from the uniform code
    min_dist_u: int | None = None  # keep away from every first exclusion code

    def describe(self) -> dict:
        return asdict(self)


@lru_cache(maxsize=None)
def min_dist_threshold(kappa: int, u: int) -> float:
    return float(np.linalg.norm(subspace_exclusion(kappa, u).q - subspace_exclusion(kappa, kappa - 1).q))


@lru_cache(maxsize=None)
def _first_exclusion_codes(kappa: int) -> np.ndarray:
    return np.stack([subspace_exclusion_from(S).q for S in hyperplanes(kappa)])


@lru_cache(maxsize=None)
def _uniform(kappa: int) -> np.ndarray:
    return uniform_fraction(kappa).q


def feasible_mask(X: np.ndarray, cons: ConstraintSet, tol: float = 1e-9) -> np.ndarray:
    """Row-wise constraint check for a batch of candidate q vectors."""
    X = np.atleast_2d(X)
    kappa = X.shape[1].bit_length() - 1
    ok = np.abs(X.sum(axis=1) - 1.0) <= tol
    if cons.nonnegative:
        ok &= X.min(axis=1) >= -tol
    if cons.zero_column_pinned:
        ok &= np.abs(X[:, 0]) <= tol
    if cons.radius is not None:
        dist = np.linalg.norm(X - _uniform(kappa), axis=1)
        ok &= np.abs(dist - cons.radius) <= tol
    if cons.min_dist_u is not None:
        thresh = min_dist_threshold(kappa, cons.min_dist_u)
        firsts = _first_exclusion_codes(kappa)
        dists = np.linalg.norm(X[:, None, :] - firsts[None, :, :], axis=2)
        ok &= dists.min(axis=1) >= thresh - tol
    return ok


def check_constraints(q: np.ndarray, cons: ConstraintSet, tol: float = 1e-9) -> list[str]:
    """Names of the constraints q violates (empty when feasible)."""
    _, arr = as_qvector(q)
    names = []
    for name, single in (
        ("unit-sum", ConstraintSet(False, False)),
        ("nonnegativity", ConstraintSet(cons.nonnegative, False)),
        ("zero-column", ConstraintSet(False, cons.zero_column_pinned)),
        ("radius", ConstraintSet(False, False, radius=cons.radius)),
        ("min-distance", ConstraintSet(False, False, min_dist_u=cons.min_dist_u)),
    ):
        if not feasible_mask(arr, single, tol)[0]:
            names.append(name)
    return names


def _normals(arr: np.ndarray, cons: ConstraintSet) -> np.ndarray:
    size = arr.size
    rows = [np.ones(size)]
    if cons.zero_column_pinned:
        e0 = np.zeros(size)
        e0[0] = 1.0
        rows.append(e0)
    if cons.radius is not None and cons.radius > 0:
        rows.append(arr - uniform_fraction(size.bit_length() - 1).q)
    return np.stack(rows)


def project_tangent(vec: np.ndarray, normals: np.ndarray) -> np.ndarray:
    basis, _ = np.linalg.qr(normals.T)
    return vec - basis @ (basis.T @ vec)


# ---------------------------------------------------------------- local probe


@dataclass
class StationarityReport:
    metric: str
    projected_gradient_norm: float
    min_curvature: float
    max_curvature: float
    directions: int
    seed: int
    constraints: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)


def _metric_fn(metric: str, n: int, epsilon: float):
    params = ChannelParams.eps(n, epsilon)
    if metric == "equivocation":
        return lambda x: equivocation_loss_sd(x, params).value, gradient_equivocation
    if metric == "chi2":
        return lambda x: chi2_sd(x, params).value, gradient_chi2
    raise UsageError(f"unknown metric {metric!r}")


def stationarity_probe(
    q,
    n: int,
    epsilon: float,
    constraints: ConstraintSet | None = None,
    metric: str = "equivocation",
    directions: int = 64,
    seed: int = 0,
    step: float = 1e-3,
) -> StationarityReport:
    """Projected gradient norm and sampled curvature at q.

    On the radius sphere the curvature is measured along great circles about
    the uniform code, which carries the second-order inward correction
    needed to stay on the sphere.
    """
    cons = constraints or ConstraintSet()
    kappa, arr = as_qvector(q)
    arr = np.array(arr, dtype=float)
    violated = check_constraints(arr, cons)
    if violated:
        raise UsageError(f"q violates constraints: {violated}")
    f, grad_fn = _metric_fn(metric, n, epsilon)
    normals = _normals(arr, cons)
    pg = project_tangent(grad_fn(arr, n, epsilon), normals)

    rng = np.random.default_rng(seed)
    center = uniform_fraction(kappa).q
    radial = arr - center
    on_sphere = cons.radius is not None and cons.radius > 0
    f0 = f(arr)
    curv = []
    for _ in range(directions):
        d = project_tangent(rng.standard_normal(arr.size), normals)
        d /= np.linalg.norm(d)
        if on_sphere:
            R = cons.radius
            ang = step / R

            def point(s):
                return center + math.cos(s) * radial + R * math.sin(s) * d

            plus, minus = point(ang), point(-ang)
        else:
            plus, minus = arr + step * d, arr - step * d
        curv.append((f(plus) + f(minus) - 2.0 * f0) / step ** 2)
    return StationarityReport(
        metric,
        float(np.linalg.norm(pg)),
        float(min(curv)),
        float(max(curv)),
        directions,
        seed,
        cons.describe(),
    )


# ---------------------------------------------------------------- global probe


def chi2_batch(Q: np.ndarray, n: int, epsilon: float) -> np.ndarray:
    """chi2 for each row of Q (fixed epsilon), vectorized over rows."""
    Q = np.atleast_2d(Q)
    size = Q.shape[1]
    kappa = size.bit_length() - 1
    idx = np.arange(size, dtype=np.int64)
    parity = popcount_array(np.bitwise_and.outer(idx[1:], idx)) % 2 == 0
    zetas = Q @ parity.T.astype(float)
    ratio = epsilon / (2.0 - epsilon)
    bracket = 1.0 + _phi_from_zeta(zetas, n, ratio).sum(axis=1)
    return _chi2_scale(kappa, n, epsilon) * bracket - 1.0


@dataclass
class GlobalProbeReport:
    construction: str
    kappa: int
    n: int
    epsilon: float
    constraints: dict
    samples: int
    attempts: int
    violations: int
    min_margin: float
    candidate_value: float
    seed: int

    def to_json(self) -> dict:
        return asdict(self)


def _anchor_points(kappa: int) -> np.ndarray:
    """Every exclusion code (any excluded subspace of dim 1..kappa-1)."""
    pts = []
    for d in range(1, kappa):
        for S in enumerate_subspaces(kappa, d):
            pts.append(subspace_exclusion_from(S).q)
    return np.array(pts)


def _sample_chunk(args):
    kappa, count, seed_seq, radius, cons = args
    rng = np.random.default_rng(seed_seq)
    size = 1 << kappa
    center = uniform_fraction(kappa).q
    accepted = []
    attempts = 0
    limit = 500 * count + 1000
    while len(accepted) < count and attempts < limit:
        batch = max(64, 2 * (count - len(accepted)))
        alpha = rng.choice([0.2, 0.5, 1.0, 3.0])
        raw = np.zeros((batch, size))
        raw[:, 1:] = rng.dirichlet(np.full(size - 1, alpha), size=batch)
        if radius is not None:
            off = raw - center
            norms = np.linalg.norm(off, axis=1)
            keep = norms > 1e-12
            raw = center + radius * off[keep] / norms[keep, None]
        attempts += batch
        good = raw[feasible_mask(raw, cons, tol=1e-12)]
        accepted.extend(good[: count - len(accepted)])
    return np.array(accepted).reshape(-1, size), attempts


def chi2_global_probe(
    kappa: int,
    n: int,
    epsilon: float,
    construction: str = "uniform",
    u: int | None = None,
    samples: int = 10_000,
    seed: int = 0,
    enforce_min_dist: bool = True,
    workers: int = 1,
) -> GlobalProbeReport:
    """Compare the construction against constrained samples of the feasible set.

    ``uniform``: samples cover the simplex with q_0 = 0.  ``sec``: samples lie
    on the sphere of the construction's radius about the uniform code, and
    when ``enforce_min_dist`` is set (and u < kappa-1) they also keep the
    required distance from every first exclusion code.  All exclusion codes
    of every dimension, pushed radially onto the sphere, are added as extra
    structured samples when they satisfy the constraints.
    """
    _check_eps(epsilon)
    if construction == "uniform":
        cand = uniform_fraction(kappa)
        cons = ConstraintSet()
        radius = None
        label = "uniform"
    elif construction == "sec":
        if u is None:
            raise UsageError("sec construction needs u")
        cand = subspace_exclusion(kappa, u)
        _, radius = rho(kappa, u)
        use_min = enforce_min_dist and u < kappa - 1
        cons = ConstraintSet(radius=radius, min_dist_u=u if use_min else None)
        label = f"sec(u={u})"
    else:
        raise UsageError(f"unknown construction {construction!r}")
    if check_constraints(cand.q, cons):
        raise UsageError("construction does not satisfy its own constraint set")

    seeds = np.random.SeedSequence(seed).spawn(_STREAMS)
    per = [samples // _STREAMS + (1 if i < samples % _STREAMS else 0) for i in range(_STREAMS)]
    jobs = [(kappa, c, s, radius, cons) for c, s in zip(per, seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_sample_chunk, jobs))
    else:
        parts = [_sample_chunk(j) for j in jobs]
    pts = [p for p, _ in parts if p.size]
    attempts = sum(a for _, a in parts)

    anchors = _anchor_points(kappa)
    if radius is not None:
        center = uniform_fraction(kappa).q
        off = anchors - center
        anchors = center + radius * off / np.linalg.norm(off, axis=1)[:, None]
    anchors = anchors[feasible_mask(anchors, cons, tol=1e-12)]
    allpts = np.concatenate(pts + [anchors]) if pts else anchors

    base = chi2_sd(cand, ChannelParams.eps(n, epsilon)).value
    vals = chi2_batch(allpts, n, epsilon)
    margins = vals - base
    tol = 1e-12 * max(1.0, abs(base))
    return GlobalProbeReport(
        label,
        kappa,
        n,
        epsilon,
        cons.describe(),
        int(allpts.shape[0]),
        int(attempts),
        int(np.sum(margins < -tol)),
        float(margins.min()) if margins.size else math.inf,
        float(base),
        seed,
    )
