# clustering.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
Jaccard distances between rule coverages, average-linkage agglomerative
clustering, representative rule selection and log filtering
"""

from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist, squareform

from .encoding import FeatureSpace, encode_log, rule_matrix
from .eventlog import EventLog, LabelFunction
from .regression import RegressionModel
from .util import log, ConfigurationError

_TIE = 1e-12


def jaccard_matrix(R: np.ndarray) -> np.ndarray:
    """Pairwise Jaccard distances between the coverage columns of a rule
    matrix: 1 - |cover(i) & cover(j)| / |cover(i) | cover(j)|."""
    R = np.asarray(R, dtype=bool)
    if R.shape[1] == 0:
        return np.zeros((0, 0))
    if R.shape[1] == 1:
        return np.zeros((1, 1))
    return squareform(pdist(R.T, metric='jaccard'))


@dataclass(frozen=True)
class MergeStep:
    """Clusters `a` and `b` merged at `distance`; ids below n are rules,
    id n + s is the cluster created by step s."""
    a: int
    b: int
    distance: float
    size: int


@dataclass
class Dendrogram:
    n: int
    steps: List[MergeStep] = field(default_factory=list)

    def members(self) -> Dict[int, Tuple[int, ...]]:
        out = {i: (i,) for i in range(self.n)}
        for s, step in enumerate(self.steps):
            out[self.n + s] = tuple(sorted(out[step.a] + out[step.b]))
        return out

    def to_linkage(self) -> np.ndarray:
        """The merges as a scipy linkage matrix."""
        return np.array([[st.a, st.b, st.distance, st.size]
                         for st in self.steps], dtype=float).reshape(-1, 4)

    def inversions(self) -> int:
        """Number of steps merging below the previous step's distance."""
        d = [st.distance for st in self.steps]
        return sum(1 for x, y in zip(d, d[1:]) if y < x - _TIE)

    def to_frame(self) -> pd.DataFrame:
        """One row per merge step."""
        return pd.DataFrame([[s, st.a, st.b, st.distance, st.size]
                             for s, st in enumerate(self.steps)],
                            columns=['step', 'cluster_a', 'cluster_b',
                                     'distance', 'size'])


def agglomerate(dm: np.ndarray) -> Dendrogram:
    """Average-linkage clustering with Lance-Williams updates.

    Each step merges the two clusters with the smallest average pairwise
    distance; ties are resolved by the smallest (min member of A, min member
    of B). Inversions are kept as they are.
    """
    dm = np.asarray(dm, dtype=float)
    n = dm.shape[0]
    if n < 1:
        raise ConfigurationError("clustering needs at least one rule")
    members = {i: (i,) for i in range(n)}
    dist = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = dm[i, j]
    steps = []
    next_id = n
    while len(members) > 1:
        best = min(dist.values())
        ties = [pair for pair, d in dist.items() if d <= best + _TIE]
        a, b = min(ties, key=lambda p: tuple(sorted((members[p[0]][0],
                                                     members[p[1]][0]))))
        if members[a][0] > members[b][0]:
            a, b = b, a
        d_ab = dist[(min(a, b), max(a, b))]
        na, nb = len(members[a]), len(members[b])
        merged = tuple(sorted(members.pop(a) + members.pop(b)))
        for c in list(members):
            dca = dist.pop((min(a, c), max(a, c)))
            dcb = dist.pop((min(b, c), max(b, c)))
            dist[(c, next_id)] = (na * dca + nb * dcb) / (na + nb)
        del dist[(min(a, b), max(a, b))]
        members[next_id] = merged
        steps.append(MergeStep(a, b, float(d_ab), len(merged)))
        next_id += 1
    dendrogram = Dendrogram(n, steps)
    if dendrogram.inversions():
        log.info(f"average linkage produced {dendrogram.inversions()} "
                 f"inversion(s)")
    return dendrogram


def cut(dendrogram: Dendrogram, K: int) -> List[List[int]]:
    """Undoes the last K - 1 merges; clusters are sorted by their smallest
    member."""
    n = dendrogram.n
    if not 1 <= K <= n:
        raise ConfigurationError(f"K must be between 1 and {n}, got {K}")
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    members = dendrogram.members()
    for step in dendrogram.steps[:n - K]:
        ra, rb = find(members[step.a][0]), find(members[step.b][0])
        parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


@dataclass
class ClusterReport:
    clusters: List[List[int]]
    representatives: List[int]
    support_pos: Dict[int, float]
    support_neg: Dict[int, float]
    coefficients: Dict[int, float]

    @property
    def K(self) -> int:
        return len(self.clusters)


def _support(R: np.ndarray, mask: np.ndarray, r: int) -> float:
    if not mask.any():
        return 0.0
    return float(R[mask, r].mean())


def select_representatives(clusters: Sequence[Sequence[int]],
                           model: RegressionModel, R_full: np.ndarray = None,
                           labels_full=None) -> ClusterReport:
    """Picks the rule with the largest |coefficient| per cluster (ties to
    the lower rule index).

    :param clusters: lists of rule indices (columns of the model)
    :param model: fitted RegressionModel
    :param R_full: rule matrix of the full log, for the support columns
    :param labels_full: labels of the full log in row order of R_full
    """
    reps = []
    coefs = {}
    for cluster in clusters:
        if not cluster:
            raise ValueError("empty cluster")
        ranked = sorted(cluster, key=lambda r: (-abs(model.weights[r]), r))
        rep = ranked[0]
        reps.append(rep)
        coefs.update({r: float(model.weights[r]) for r in cluster})
    sup_pos, sup_neg = {}, {}
    if R_full is not None:
        y = np.asarray(labels_full)
        for cluster in clusters:
            for r in cluster:
                sup_pos[r] = _support(R_full, y == 1, r)
                sup_neg[r] = _support(R_full, y == 0, r)
    return ClusterReport([list(c) for c in clusters], reps, sup_pos, sup_neg,
                         coefs)


def filter_log(elog: EventLog, labels: LabelFunction, rule,
               space: FeatureSpace, X: np.ndarray = None
               ) -> Tuple[EventLog, LabelFunction]:
    """Sub-log of the traces on which the rule holds, with the labels
    restricted to it."""
    if X is None:
        X = encode_log(elog, space)
    holds = rule_matrix(X, [rule])[:, 0]
    sub = EventLog(t for t, h in zip(elog, holds) if h)
    return sub, labels.restrict(sub)
