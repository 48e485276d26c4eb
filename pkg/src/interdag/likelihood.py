"""Likelihood evaluation, closed-form fitting, and penalized scoring.

All statistics are uncentered: for a block of n_I rows sharing target I the
second moment is S_I = (1/n_I) sum x x^T and the first moment is the plain
row mean.  Because an intervention makes the targeted coordinates exogenous,
the log-likelihood splits into per-vertex terms, each involving only the
rows whose target does NOT contain that vertex.  The per-vertex mixture

    n_minus_k = sum_{I: k not in I} n_I,
    S_minus_k = sum_{I: k not in I} (n_I / n_minus_k) S_I

is all the data a vertex's parameters ever see, which is what makes greedy
and exact search tractable.
"""

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.linalg

from .errors import DataError, DegenerateFitError, ParameterError
from .model import (
    Dag,
    Dataset,
    GaussianCausalModel,
    InterventionSpec,
    InterventionTarget,
    TargetFamily,
)

__all__ = [
    "SufficientStats",
    "LocalStats",
    "FittedModel",
    "NaturalParams",
    "sufficient_stats",
    "local_stats",
    "mle_given_dag",
    "log_likelihood",
    "decomposed_log_likelihood",
    "natural_params",
    "local_score",
    "bic_score",
    "LocalScoreCache",
]

_COND_LIMIT = 1e12  # parent moment blocks worse-conditioned than this are unusable
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Per-target row counts with first and second moments."""

    p: int
    n: int
    counts: Mapping[InterventionTarget, int]
    second_moments: Mapping[InterventionTarget, np.ndarray]
    first_moments: Mapping[InterventionTarget, np.ndarray]

    def targets(self) -> tuple[InterventionTarget, ...]:
        return tuple(sorted(self.counts, key=lambda t: (len(t.members), t.members)))

    def family(self) -> TargetFamily:
        return TargetFamily(frozenset(self.counts))

    def count(self, target: InterventionTarget) -> int:
        return self.counts.get(target, 0)

    def second_moment(self, target: InterventionTarget) -> np.ndarray:
        return self.second_moments[target]

    def first_moment(self, target: InterventionTarget) -> np.ndarray:
        return self.first_moments[target]


def sufficient_stats(dataset: Dataset) -> SufficientStats:
    """Accumulate per-target counts and moments; rejects empty datasets."""
    if dataset.n == 0:
        raise DataError("cannot compute statistics of an empty dataset")
    counts: dict[InterventionTarget, int] = {}
    seconds: dict[InterventionTarget, np.ndarray] = {}
    firsts: dict[InterventionTarget, np.ndarray] = {}
    groups: dict[InterventionTarget, list[int]] = {}
    for i, t in enumerate(dataset.targets):
        groups.setdefault(t, []).append(i)
    for t, rows in groups.items():
        X = dataset.values[rows]
        n_t = len(rows)
        S = (X.T @ X) / n_t
        m = X.sum(axis=0) / n_t
        S.setflags(write=False)
        m.setflags(write=False)
        counts[t] = n_t
        seconds[t] = S
        firsts[t] = m
    return SufficientStats(dataset.p, dataset.n, counts, seconds, firsts)


@dataclass(frozen=True, eq=False)
class LocalStats:
    """Per-vertex mixture moments over the rows that exclude each vertex.

    A vertex with ``counts_excluding[k-1] == 0`` appears in every observed
    target, so its parameters are unidentified; the zero count is the error
    marker and every downstream fit or score treats the vertex as unusable.
    """

    p: int
    n: int
    counts_excluding: np.ndarray
    mixtures: np.ndarray  # shape (p, p, p); mixtures[k-1] is the matrix for vertex k

    def count_excluding(self, k: int) -> int:
        return int(self.counts_excluding[k - 1])

    def mixture(self, k: int) -> np.ndarray:
        return self.mixtures[k - 1]

    def identified(self, k: int) -> bool:
        return self.counts_excluding[k - 1] > 0

    @property
    def unidentified_vertices(self) -> tuple[int, ...]:
        return tuple(k for k in range(1, self.p + 1) if not self.identified(k))


def local_stats(stats: SufficientStats, family: TargetFamily | None = None) -> LocalStats:
    """Mix the per-target moments into the per-vertex exclusion statistics.

    ``family``, when given, must cover every observed target; targets in the
    family without data contribute nothing to the mixtures.
    """
    p = stats.p
    if family is not None:
        family.validate_for(p)
        for t in stats.targets():
            if t not in family:
                raise ParameterError(
                    f"observed target {t.members} is missing from the supplied family"
                )
    counts = np.zeros(p, dtype=np.int64)
    mixtures = np.zeros((p, p, p))
    for k in range(1, p + 1):
        n_ex = 0
        acc = np.zeros((p, p))
        for t in stats.targets():
            if k in t:
                continue
            n_t = stats.count(t)
            n_ex += n_t
            acc += n_t * stats.second_moment(t)
        counts[k - 1] = n_ex
        if n_ex > 0:
            mixtures[k - 1] = acc / n_ex
    mixtures.setflags(write=False)
    counts.setflags(write=False)
    return LocalStats(p, stats.n, counts, mixtures)


def _fit_row(S: np.ndarray, k_idx: int, pa_idx: list[int]) -> tuple[np.ndarray, float] | None:
    """Least-squares coefficients of one vertex on its parents and the residual
    second moment, or None when the parent block is unusable.

    Solved through a Cholesky factorization of the parent block; the residual
    is evaluated as the quadratic form of (1, -b), which keeps it a true
    quadratic form of a positive semidefinite matrix.
    """
    if not pa_idx:
        return np.zeros(0), float(S[k_idx, k_idx])
    Spp = S[np.ix_(pa_idx, pa_idx)]
    try:
        if np.linalg.cond(Spp) > _COND_LIMIT:
            return None
    except np.linalg.LinAlgError:
        return None
    try:
        factor = scipy.linalg.cho_factor(Spp, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError:
        return None
    b = scipy.linalg.cho_solve(factor, S[pa_idx, k_idx], check_finite=False)
    full = [k_idx, *pa_idx]
    v = np.empty(len(full))
    v[0] = 1.0
    v[1:] = -b
    resid = float(v @ S[np.ix_(full, full)] @ v)
    return b, resid


@dataclass(frozen=True, eq=False)
class FittedModel:
    """Closed-form fit of a fixed DAG.

    ``log_likelihood`` is the exact joint log-density of the non-intervened
    coordinates at the fitted parameters (the intervened coordinates' own
    density terms depend only on nuisance parameters and are left out).
    ``bic`` drops the 2*pi constant as well and subtracts half log n per
    edge, so it ranks structures identically.
    """

    dag: Dag
    weights: np.ndarray
    error_vars: np.ndarray
    log_likelihood: float
    bic: float

    def to_model(self) -> GaussianCausalModel:
        return GaussianCausalModel(self.dag, self.weights, self.error_vars)


def mle_given_dag(dag: Dag, local: LocalStats) -> FittedModel:
    """Maximize the likelihood over weights and error variances of a fixed DAG.

    Each vertex regresses on its parents under that vertex's exclusion
    mixture; the optimum is attained in closed form.  Requires strictly more
    excluding rows than parents at every vertex.
    """
    if dag.p != local.p:
        raise ParameterError("DAG and statistics disagree on the vertex count")
    p = dag.p
    W = np.zeros((p, p))
    s2 = np.zeros(p)
    core = 0.0  # sum of per-vertex maximized terms, without 2*pi constants
    for k in range(1, p + 1):
        pa = dag.parents(k)
        n_ex = local.count_excluding(k)
        if n_ex <= len(pa):
            raise DegenerateFitError(
                f"vertex {k}: {n_ex} usable rows cannot identify {len(pa)} parents"
            )
        fit = _fit_row(local.mixture(k), k - 1, [j - 1 for j in pa])
        if fit is None:
            raise DegenerateFitError(f"vertex {k}: singular parent moment block")
        b, resid = fit
        if resid <= 0 or not math.isfinite(resid):
            raise DegenerateFitError(f"vertex {k}: degenerate residual variance {resid!r}")
        W[k - 1, [j - 1 for j in pa]] = b
        s2[k - 1] = resid
        core += -0.5 * n_ex * (1.0 + math.log(resid))
    loglik = core - 0.5 * _LOG_2PI * float(local.counts_excluding.sum())
    bic = core - 0.5 * math.log(local.n) * dag.num_edges
    return FittedModel(dag, W, s2, loglik, bic)


@dataclass(frozen=True, eq=False)
class NaturalParams:
    """Precision-form parameters of the model under one target.

    ``precision`` is the inverse covariance, assembled structurally (never by
    matrix inversion).  ``nu`` is precision @ mean.  ``quad_form`` equals
    nu^T precision^{-1} nu and ``log_det`` is log det(precision); both come
    out in closed form because the cut system is triangular.
    """

    target: InterventionTarget
    precision: np.ndarray
    nu: np.ndarray
    quad_form: float
    log_det: float


def natural_params(
    model: GaussianCausalModel,
    target: InterventionTarget,
    spec: InterventionSpec | None = None,
) -> NaturalParams:
    """Assemble the precision matrix and linear term under one target."""
    target.validate_for(model.p)
    p = model.p
    gamma = 1.0 / model.error_vars
    keep = np.ones(p, dtype=bool)
    mu_u = tau2 = None
    if target.members:
        if spec is None:
            raise ParameterError(
                f"intervention parameters required for target {target.members}"
            )
        mu_u, tau2 = spec.for_target(target)
        keep[[v - 1 for v in target.members]] = False
    imb = np.eye(p) - model.weights
    scale = np.where(keep, np.sqrt(gamma), 0.0)
    C = imb * scale[:, None]  # rows of intervened vertices drop out entirely
    K = C.T @ C
    nu = np.zeros(p)
    quad = 0.0
    log_det = float(np.log(gamma[keep]).sum())
    if target.members:
        idx = [v - 1 for v in target.members]
        K[idx, idx] += 1.0 / tau2
        nu[idx] = mu_u / tau2
        quad = float((mu_u * mu_u / tau2).sum())
        log_det -= float(np.log(tau2).sum())
    return NaturalParams(target, K, nu, quad, log_det)


def log_likelihood(
    model: GaussianCausalModel,
    stats: SufficientStats,
    spec: InterventionSpec | None = None,
) -> float:
    """Exact joint log-density of all rows under the model, via precision form.

    Equals the sum over rows of the multivariate normal log-density of the
    row's interventional distribution.
    """
    if stats.p != model.p:
        raise ParameterError("model and statistics disagree on the vertex count")
    p = model.p
    total = 0.0
    for t in stats.targets():
        par = natural_params(model, t, spec)
        n_t = stats.count(t)
        S = stats.second_moment(t)
        m = stats.first_moment(t)
        total += n_t * (
            -0.5 * p * _LOG_2PI
            - 0.5 * float(np.sum(S * par.precision))
            + float(m @ par.nu)
            - 0.5 * par.quad_form
            + 0.5 * par.log_det
        )
    return total


def decomposed_log_likelihood(
    model: GaussianCausalModel,
    local: LocalStats,
    stats: SufficientStats,
    spec: InterventionSpec | None = None,
) -> float:
    """The same value as log_likelihood, assembled from per-vertex terms.

    The model-dependent part is a sum over vertices of
    -n_minus_k/2 * (gamma_k * q_k - log gamma_k) with q_k the quadratic form
    of the vertex's structural row under its exclusion mixture; the rest is
    an additive constant in the weights and error variances.
    """
    if local.p != model.p or stats.p != model.p:
        raise ParameterError("model and statistics disagree on the vertex count")
    p = model.p
    imb = np.eye(p) - model.weights
    total = 0.0
    for k in range(1, p + 1):
        n_ex = local.count_excluding(k)
        if n_ex == 0:
            continue
        row = imb[k - 1]
        q = float(row @ local.mixture(k) @ row)
        gamma_k = 1.0 / model.error_vars[k - 1]
        total += -0.5 * n_ex * (gamma_k * q - math.log(gamma_k))
    total -= 0.5 * _LOG_2PI * float(local.counts_excluding.sum())
    # density terms of the intervened coordinates: constants in the model
    for t in stats.targets():
        if t.is_empty:
            continue
        if spec is None:
            raise ParameterError(
                f"intervention parameters required for target {t.members}"
            )
        mu_u, tau2 = spec.for_target(t)
        n_t = stats.count(t)
        S = stats.second_moment(t)
        m = stats.first_moment(t)
        for i, v in enumerate(t.members):
            second = S[v - 1, v - 1]
            first = m[v - 1]
            total += n_t * (
                -0.5 * math.log(2.0 * math.pi * tau2[i])
                - (second - 2.0 * mu_u[i] * first + mu_u[i] ** 2) / (2.0 * tau2[i])
            )
    return total


def local_score(
    k: int,
    parent_set: Iterable[int],
    local: LocalStats,
    n: int | None = None,
    penalty: float | None = None,
) -> float:
    """Penalized maximized per-vertex term; -inf when the fit is infeasible.

    Returns -n_minus_k/2 * (1 + log residual) - penalty * |parents|, with the
    penalty defaulting to half log n.  Infeasible means: not more usable rows
    than parents, an unidentified vertex, or a parent block that is singular
    or conditioned worse than 1e12.
    """
    pa = tuple(sorted(set(int(j) for j in parent_set)))
    if not 1 <= k <= local.p:
        raise ParameterError(f"vertex {k} is out of range 1..{local.p}")
    for j in pa:
        if not 1 <= j <= local.p:
            raise ParameterError(f"parent {j} is out of range 1..{local.p}")
        if j == k:
            raise ParameterError(f"vertex {k} cannot be its own parent")
    if n is None:
        n = local.n
    if penalty is None:
        penalty = 0.5 * math.log(n)
    if penalty < 0 or not math.isfinite(penalty):
        raise ParameterError(f"penalty must be finite and non-negative, got {penalty!r}")
    n_ex = local.count_excluding(k)
    if n_ex <= len(pa):
        return -math.inf
    fit = _fit_row(local.mixture(k), k - 1, [j - 1 for j in pa])
    if fit is None:
        return -math.inf
    _, resid = fit
    if resid <= 0 or not math.isfinite(resid):
        return -math.inf
    return -0.5 * n_ex * (1.0 + math.log(resid)) - penalty * len(pa)


def bic_score(
    dag: Dag,
    local: LocalStats,
    n: int | None = None,
    penalty: float | None = None,
) -> float:
    """Sum of per-vertex penalized scores; larger is better."""
    if dag.p != local.p:
        raise ParameterError("DAG and statistics disagree on the vertex count")
    return sum(local_score(k, dag.parents(k), local, n, penalty) for k in range(1, dag.p + 1))


class LocalScoreCache:
    """Memoizes local scores keyed by (vertex, parent set).

    Concurrent insert-or-read is safe: values for a key are deterministic, so
    a racing overwrite stores the same number.
    """

    def __init__(self, local: LocalStats, n: int | None = None, penalty: float | None = None):
        self._local = local
        self._n = local.n if n is None else n
        self._penalty = 0.5 * math.log(self._n) if penalty is None else penalty
        self._table: dict[tuple[int, tuple[int, ...]], float] = {}

    @property
    def local(self) -> LocalStats:
        return self._local

    @property
    def penalty(self) -> float:
        return self._penalty

    def score(self, k: int, parent_set: Iterable[int]) -> float:
        key = (k, tuple(sorted(parent_set)))
        hit = self._table.get(key)
        if hit is None:
            hit = local_score(k, key[1], self._local, self._n, self._penalty)
            self._table[key] = hit
        return hit

    def dag_score(self, dag: Dag) -> float:
        return sum(self.score(k, dag.parents(k)) for k in range(1, dag.p + 1))

    def __len__(self) -> int:
        return len(self._table)
