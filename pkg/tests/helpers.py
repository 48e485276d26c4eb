"""Shared test fixtures: hand-built graphs, brute-force enumeration oracles,
and random instance generators.

Everything here is deliberately independent of the library internals it is
used to check: DAG enumeration walks all orientation patterns directly,
and the likelihood oracle sums exact multivariate normal log-densities.
"""

import itertools

import numpy as np
from scipy.stats import multivariate_normal

from interdag import (
    Dag,
    Dataset,
    InterventionSpec,
    InterventionTarget,
    TargetFamily,
    derive_seed,
    interventional_moments,
    sample_dataset,
    sample_normalized_model,
    sample_random_dag,
)


def demo_trio() -> tuple[Dag, Dag, Dag]:
    """Three 7-vertex DAGs sharing one skeleton and the single collider 3->6<-5.

    The first two stay indistinguishable when vertex 4 is intervened on; the
    third cuts a different edge at 4 and becomes distinguishable.
    """
    d = Dag.from_edges(
        7,
        [(2, 1), (2, 3), (3, 4), (1, 5), (2, 5), (2, 6), (3, 6), (5, 6), (3, 7), (4, 7)],
    )
    d1 = Dag.from_edges(
        7,
        [(5, 1), (1, 2), (5, 2), (2, 3), (3, 4), (2, 6), (3, 6), (5, 6), (3, 7), (4, 7)],
    )
    d2 = Dag.from_edges(
        7,
        [(2, 1), (3, 2), (4, 3), (7, 3), (7, 4), (1, 5), (2, 5), (2, 6), (3, 6), (5, 6)],
    )
    return d, d1, d2


def all_dags(p: int) -> list[Dag]:
    """Every DAG on p vertices, by filtering all 3^C(p,2) orientation patterns.

    Each unordered pair independently takes one of three states (absent,
    forward, backward); patterns with a directed cycle are dropped.  Only
    sensible for p <= 4 (729 patterns).
    """
    pairs = list(itertools.combinations(range(1, p + 1), 2))
    dags = []
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (a, b), s in zip(pairs, states):
            if s == 1:
                edges.append((a, b))
            elif s == 2:
                edges.append((b, a))
        if _acyclic_edges(p, edges):
            dags.append(Dag.from_edges(p, edges))
    return dags


def _acyclic_edges(p: int, edges: list[tuple[int, int]]) -> bool:
    children = {k: [] for k in range(1, p + 1)}
    indeg = {k: 0 for k in range(1, p + 1)}
    for t, h in edges:
        children[t].append(h)
        indeg[h] += 1
    ready = [k for k in indeg if indeg[k] == 0]
    seen = 0
    while ready:
        v = ready.pop()
        seen += 1
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    return seen == p


def random_conservative_family(rng: np.random.Generator, p: int) -> TargetFamily:
    """The empty target plus a few random small targets; always conservative."""
    targets = [InterventionTarget.empty()]
    extra = int(rng.integers(1, 4))
    for _ in range(extra):
        size = int(rng.integers(1, min(3, p) + 1))
        members = rng.choice(p, size=size, replace=False)
        targets.append(InterventionTarget(tuple(int(v) + 1 for v in members)))
    return TargetFamily(frozenset(targets))


def random_instance(seed: int, p: int, n: int, expected_degree: float = 1.5):
    """A random (model, family, spec, dataset) tuple for oracle comparisons.

    Rows are split evenly across the family's targets, observational rows
    first, so every target in the family actually occurs in the data.
    """
    dag = sample_random_dag(p, expected_degree, derive_seed(seed, 11))
    model = sample_normalized_model(dag, derive_seed(seed, 12))
    rng = np.random.Generator(np.random.Philox(derive_seed(seed, 13)))
    family = random_conservative_family(rng, p)
    spec = InterventionSpec.constant(
        [t for t in family if not t.is_empty],
        mean=float(rng.uniform(-5, 5)),
        variance=float(rng.uniform(0.05, 1.0)),
    )
    targets = family.sorted_targets()
    sequence = []
    for i, t in enumerate(targets):
        share = n // len(targets) + (1 if i < n % len(targets) else 0)
        sequence.extend([t] * share)
    data = sample_dataset(model, sequence, spec, derive_seed(seed, 14))
    return model, family, spec, data


def density_oracle_loglik(model, dataset: Dataset, spec) -> float:
    """Sum of exact multivariate normal log-densities, row by row."""
    total = 0.0
    cache = {}
    for target, x in dataset.rows():
        if target not in cache:
            cache[target] = interventional_moments(model, target, spec)
        mu, cov = cache[target]
        total += float(multivariate_normal.logpdf(x, mean=mu, cov=cov))
    return total
