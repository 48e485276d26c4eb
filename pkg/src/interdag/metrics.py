"""Structural distance and confusion counts between graphs.

All comparisons run on adjacency matrices: a directed edge a -> b sets
entry (a, b); an undirected edge of a partially directed graph sets both
(a, b) and (b, a).  A DAG and an essential graph can therefore be compared
directly.
"""

from dataclasses import dataclass

import numpy as np

from .equivalence import EssentialGraph
from .errors import ParameterError
from .model import Dag

__all__ = ["ConfusionCounts", "adjacency", "shd", "skeleton_confusion", "directed_confusion"]


@dataclass(frozen=True)
class ConfusionCounts:
    true_positives: int
    false_positives: int
    false_negatives: int
    true_negatives: int

    @property
    def total(self) -> int:
        return (
            self.true_positives
            + self.false_positives
            + self.false_negatives
            + self.true_negatives
        )


def adjacency(graph: Dag | EssentialGraph) -> np.ndarray:
    """Boolean adjacency matrix; undirected edges occupy both triangles."""
    if isinstance(graph, Dag):
        A = np.zeros((graph.p, graph.p), dtype=bool)
        for t, h in graph.edges:
            A[t - 1, h - 1] = True
        return A
    if isinstance(graph, EssentialGraph):
        A = np.zeros((graph.p, graph.p), dtype=bool)
        for t, h in graph.directed:
            A[t - 1, h - 1] = True
        for a, b in graph.undirected:
            A[a - 1, b - 1] = True
            A[b - 1, a - 1] = True
        return A
    raise ParameterError(f"cannot build an adjacency matrix from {type(graph).__name__}")


def _matched_adjacency(g1, g2) -> tuple[np.ndarray, np.ndarray]:
    A1, A2 = adjacency(g1), adjacency(g2)
    if A1.shape != A2.shape:
        raise ParameterError(
            f"graphs have different vertex counts: {A1.shape[0]} vs {A2.shape[0]}"
        )
    return A1, A2


def shd(g1: Dag | EssentialGraph, g2: Dag | EssentialGraph) -> int:
    """Structural Hamming distance: vertex pairs whose edge status differs.

    A pair counts once whether it differs by presence, by orientation, or by
    directed versus undirected status.
    """
    A1, A2 = _matched_adjacency(g1, g2)
    upper = np.triu_indices(A1.shape[0], k=1)
    diff = (A1[upper] != A2[upper]) | (A1.T[upper] != A2.T[upper])
    return int(np.count_nonzero(diff))


def skeleton_confusion(truth: Dag | EssentialGraph, estimate: Dag | EssentialGraph) -> ConfusionCounts:
    """Confusion counts over unordered vertex pairs; positive means adjacent."""
    A_t, A_e = _matched_adjacency(truth, estimate)
    upper = np.triu_indices(A_t.shape[0], k=1)
    t = (A_t | A_t.T)[upper]
    e = (A_e | A_e.T)[upper]
    return ConfusionCounts(
        true_positives=int(np.count_nonzero(t & e)),
        false_positives=int(np.count_nonzero(~t & e)),
        false_negatives=int(np.count_nonzero(t & ~e)),
        true_negatives=int(np.count_nonzero(~t & ~e)),
    )


def directed_confusion(truth: Dag | EssentialGraph, estimate: Dag | EssentialGraph) -> ConfusionCounts:
    """Confusion counts over ordered vertex pairs of the adjacency matrices."""
    A_t, A_e = _matched_adjacency(truth, estimate)
    off = ~np.eye(A_t.shape[0], dtype=bool)
    t = A_t[off]
    e = A_e[off]
    return ConfusionCounts(
        true_positives=int(np.count_nonzero(t & e)),
        false_positives=int(np.count_nonzero(~t & e)),
        false_negatives=int(np.count_nonzero(t & ~e)),
        true_negatives=int(np.count_nonzero(~t & ~e)),
    )
