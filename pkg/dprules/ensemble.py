# ensemble.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
Decision trees, random forests and gradient boosting on binary feature
matrices, and extraction of root-to-leaf rules from trained ensembles.

Identical training rows are compressed into one weighted row before any
tree is grown; bootstrap samples are still drawn over the original rows.
"""

import json
from dataclasses import dataclass, asdict, field
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from .encoding import rule_matrix
from .util import log, InputError

FORMAT_VERSION = 1
RANDOM_FOREST = 'random_forest'
GRADIENT_BOOSTING = 'gradient_boosting'
_MIN_GAIN = 1e-12
_EPS = 1e-12


class DecisionTree:
    """A binary tree stored as parallel node arrays; node 0 is the root.

    For internal nodes `feature` holds the split feature and `left`/`right`
    the children for bit 0 and bit 1. Leaves have feature -1 and carry a
    class (forest) or a score (boosting) in `value`.
    """

    def __init__(self, feature, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=float)

    def __eq__(self, other):
        if not isinstance(other, DecisionTree):
            return NotImplemented
        return (np.array_equal(self.feature, other.feature)
                and np.array_equal(self.left, other.left)
                and np.array_equal(self.right, other.right)
                and np.array_equal(self.value, other.value))

    def __repr__(self):
        return f"DecisionTree({self.n_nodes} nodes, depth {self.depth})"

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        return max((len(path) for _, path in self.leaf_paths()), default=0)

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node id reached by every row of X."""
        X = np.asarray(X)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            idx = np.flatnonzero(self.feature[node] >= 0)
            if len(idx) == 0:
                return node
            cur = node[idx]
            bits = X[idx, self.feature[cur]]
            node[idx] = np.where(bits == 1, self.right[cur], self.left[cur])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def leaf_paths(self) -> Iterator[Tuple[int, Tuple[Tuple[int, int], ...]]]:
        """(leaf id, ((feature, bit), ...)) for every leaf, left first."""
        stack = [(0, ())]
        while stack:
            node, path = stack.pop()
            if self.is_leaf(node):
                yield node, path
                continue
            j = int(self.feature[node])
            stack.append((int(self.right[node]), path + ((j, 1),)))
            stack.append((int(self.left[node]), path + ((j, 0),)))

    def to_dict(self) -> dict:
        return {'feature': self.feature.tolist(), 'left': self.left.tolist(),
                'right': self.right.tolist(), 'value': self.value.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(d['feature'], d['left'], d['right'], d['value'])


class _Grower:
    """Grows one tree depth first over weighted rows.

    A seeded permutation of the unused features is scanned; the first
    `subset` features are compared, extended until one valid split is
    seen. Among the compared features the best gain wins, ties going to the
    lowest feature index.
    """

    def __init__(self, X, w, max_depth, subset, rng, gains, leaf_value):
        self.X = X
        self.w = w
        self.max_depth = max_depth
        self.subset = subset
        self.rng = rng
        self.gains = gains
        self.leaf_value = leaf_value
        self.feature, self.left, self.right, self.value = [], [], [], []

    def grow(self, rows: np.ndarray, depth: int, used: frozenset) -> int:
        node = len(self.feature)
        self.feature.append(-1)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(self.leaf_value(rows))
        if depth >= self.max_depth:
            return node
        j = self.find_split(rows, used)
        if j is None:
            return node
        bits = self.X[rows, j]
        self.feature[node] = j
        self.left[node] = self.grow(rows[bits == 0], depth + 1, used | {j})
        self.right[node] = self.grow(rows[bits == 1], depth + 1, used | {j})
        return node

    def find_split(self, rows: np.ndarray, used: frozenset) -> Optional[int]:
        candidates = np.array([j for j in range(self.X.shape[1])
                               if j not in used], dtype=np.int64)
        if len(candidates) == 0:
            return None
        order = self.rng.permutation(candidates)
        gains = self.gains(rows, order)
        valid = gains > _MIN_GAIN
        if not valid.any():
            return None
        k = max(self.subset, int(np.argmax(valid)) + 1)
        window, g = order[:k], gains[:k]
        best = g.max()
        return int(window[g >= best - _EPS].min())

    def tree(self) -> DecisionTree:
        return DecisionTree(self.feature, self.left, self.right, self.value)


def _safe_div(a, b):
    return np.divide(a, b, out=np.zeros_like(a, dtype=float), where=b > _EPS)


def _gini_gains(X, y, w):
    wy = w * y

    def weighted_impurity(t, t1):
        return t - _safe_div(t1 ** 2 + (t - t1) ** 2, t)

    def gains(rows, cols):
        Xr = X[np.ix_(rows, cols)].astype(float)
        wr, wyr = w[rows], wy[rows]
        W, W1 = wr.sum(), wyr.sum()
        R, R1 = wr @ Xr, wyr @ Xr
        L, L1 = W - R, W1 - R1
        parent = W - (W1 ** 2 + (W - W1) ** 2) / W
        g = (parent - weighted_impurity(L, L1) - weighted_impurity(R, R1)) / W
        g[(L <= _EPS) | (R <= _EPS)] = -np.inf
        return g
    return gains


def _squared_error_gains(X, r, w):
    wr_ = w * r

    def gains(rows, cols):
        Xr = X[np.ix_(rows, cols)].astype(float)
        wr, sr = w[rows], wr_[rows]
        W, S = wr.sum(), sr.sum()
        WR, SR = wr @ Xr, sr @ Xr
        WL, SL = W - WR, S - SR
        g = (_safe_div(SL ** 2, WL) + _safe_div(SR ** 2, WR) - S ** 2 / W) / W
        g[(WL <= _EPS) | (WR <= _EPS)] = -np.inf
        return g
    return gains


def _check_training_data(X, y, sample_weight):
    X = np.asarray(X)
    y = np.asarray(y).astype(float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InputError("cannot train on an empty training set")
    if len(y) != X.shape[0]:
        raise InputError(f"{X.shape[0]} rows but {len(y)} labels")
    if not np.isin(y, (0, 1)).all():
        raise InputError("labels must be 0 or 1")
    w = np.ones(len(y)) if sample_weight is None \
        else np.asarray(sample_weight, dtype=float)
    if w.sum() <= 0:
        raise InputError("cannot train on an empty training set")
    return X, y, w


def _resolve_subset(max_features, n_features: int) -> int:
    if max_features is None:
        return n_features
    if max_features == 'sqrt':
        return max(1, int(np.sqrt(n_features)))
    if max_features == 'log2':
        return max(1, int(np.log2(n_features))) if n_features > 1 else 1
    if isinstance(max_features, float) and 0 < max_features <= 1:
        return max(1, int(max_features * n_features))
    return max(1, min(int(max_features), n_features))


def _grow_classifier(X, y, w, max_depth, subset, rng) -> DecisionTree:
    def majority(rows):
        w1 = (w[rows] * y[rows]).sum()
        return 1.0 if w1 >= w[rows].sum() - w1 else 0.0
    grower = _Grower(X, w, max_depth, subset, rng, _gini_gains(X, y, w),
                     majority)
    grower.grow(np.flatnonzero(w > 0), 0, frozenset())
    return grower.tree()


def train_tree(X, y, max_depth: int, feature_subset_size=None, seed=0,
               sample_weight=None) -> DecisionTree:
    """Trains a Gini classification tree.

    :param X: (n, m) binary matrix
    :param y: n labels in {0, 1}
    :param max_depth: int >= 1
    :param feature_subset_size: features compared per node: None for all,
        'sqrt', 'log2', an int or a fraction
    :param seed: int or np.random.SeedSequence
    :param sample_weight: optional non-negative row weights
    :return: DecisionTree with majority-class leaves (ties -> 1)
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    X, y, w = _check_training_data(X, y, sample_weight)
    subset = _resolve_subset(feature_subset_size, X.shape[1])
    return _grow_classifier(X, y, w, max_depth, subset,
                            np.random.default_rng(seed))


@dataclass(frozen=True)
class EnsembleParams:
    """Hyperparameters of one ensemble setting."""
    kind: str = RANDOM_FOREST
    n_trees: int = 100
    max_depth: int = 3
    max_features: Union[str, int, float, None] = 'sqrt'
    learning_rate: float = 0.1
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (RANDOM_FOREST, GRADIENT_BOOSTING):
            raise ValueError(f"unknown ensemble kind '{self.kind}'")
        min_trees = 1 if self.kind == RANDOM_FOREST else 0
        if self.n_trees < min_trees:
            raise ValueError(f"n_trees must be at least {min_trees}")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must not be negative")

    def describe(self) -> str:
        parts = [f"n_trees={self.n_trees}", f"max_depth={self.max_depth}"]
        if self.kind == RANDOM_FOREST:
            parts.append(f"max_features={self.max_features}")
            if not self.bootstrap:
                parts.append("bootstrap=False")
        else:
            parts.append(f"learning_rate={self.learning_rate}")
        return f"{self.kind}({','.join(parts)})"


@dataclass
class Ensemble:
    kind: str
    trees: List[DecisionTree]
    params: EnsembleParams
    n_features: int
    init_score: float = 0.0
    oob_error: Optional[float] = None
    loss_path: List[float] = field(default_factory=list)

    def decision_function(self, X) -> np.ndarray:
        """Mean vote (forest) or additive log-odds score (boosting)."""
        X = np.asarray(X)
        if self.kind == RANDOM_FOREST:
            votes = np.zeros(X.shape[0])
            for t in self.trees:
                votes += t.predict_value(X)
            return votes / len(self.trees)
        score = np.full(X.shape[0], self.init_score)
        for t in self.trees:
            score += self.params.learning_rate * t.predict_value(X)
        return score

    def predict_proba(self, X) -> np.ndarray:
        s = self.decision_function(X)
        return s if self.kind == RANDOM_FOREST else expit(s)

    def predict(self, X) -> np.ndarray:
        """Majority vote (ties -> 1) or sign of the boosting score."""
        s = self.decision_function(X)
        if self.kind == RANDOM_FOREST:
            return (s >= 0.5).astype(int)
        return (s >= 0).astype(int)

    def to_dict(self) -> dict:
        return {'format_version': FORMAT_VERSION, 'kind': self.kind,
                'params': asdict(self.params), 'n_features': self.n_features,
                'init_score': self.init_score, 'oob_error': self.oob_error,
                'loss_path': list(self.loss_path),
                'trees': [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "Ensemble":
        if d.get('format_version') != FORMAT_VERSION:
            raise InputError(f"unsupported ensemble format version "
                             f"{d.get('format_version')}")
        return cls(d['kind'], [DecisionTree.from_dict(t) for t in d['trees']],
                   EnsembleParams(**d['params']), d['n_features'],
                   d['init_score'], d['oob_error'], d.get('loss_path', []))

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=1)

    @classmethod
    def load(cls, path: str) -> "Ensemble":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except (OSError, ValueError, KeyError) as e:
            raise InputError(f"could not read ensemble from {path}: {e}")


def _compress(X, y, w):
    """Unique (row, label) pairs with summed weights and the inverse map."""
    key = np.hstack([np.asarray(X, dtype=np.uint8),
                     np.asarray(y, dtype=np.uint8)[:, None]])
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    weights = np.bincount(inverse, weights=w, minlength=len(uniq))
    return uniq[:, :-1], uniq[:, -1].astype(float), weights, inverse


def train_random_forest(X, y, params: EnsembleParams,
                        sample_weight=None) -> Ensemble:
    """Trains `params.n_trees` Gini trees, each on a bootstrap sample of the
    rows (unless disabled) with per-node random feature subsets.

    Every tree draws from its own substream of `params.seed`. The out-of-bag
    error is recorded when bootstrapping.
    """
    if params.kind != RANDOM_FOREST:
        raise ValueError(f"expected random_forest parameters, got {params.kind}")
    X, y, w = _check_training_data(X, y, sample_weight)
    n, m = X.shape
    Xu, yu, _, inverse = _compress(X, y, w)
    subset = _resolve_subset(params.max_features, m)
    streams = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    trees = []
    oob_votes = np.zeros(n)
    oob_count = np.zeros(n)
    for seq in streams:
        rng = np.random.default_rng(seq)
        if params.bootstrap:
            counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
        else:
            counts = np.ones(n)
        wu = np.bincount(inverse, weights=counts * w, minlength=len(Xu))
        if wu.sum() <= 0:
            wu = np.bincount(inverse, weights=w, minlength=len(Xu))
        tree = _grow_classifier(Xu, yu, wu, params.max_depth, subset, rng)
        trees.append(tree)
        if params.bootstrap:
            out = counts == 0
            pred = tree.predict_value(Xu)[inverse]
            oob_votes[out] += pred[out]
            oob_count[out] += 1
    oob_error = None
    seen = oob_count > 0
    if params.bootstrap and seen.any():
        oob_pred = (oob_votes[seen] / oob_count[seen] >= 0.5).astype(float)
        oob_error = float(np.average(oob_pred != y[seen], weights=w[seen]))
    ens = Ensemble(RANDOM_FOREST, trees, params, m, oob_error=oob_error)
    log.debug(f"trained {params.describe()} on {n} rows "
              f"({len(Xu)} distinct), oob error {oob_error}")
    return ens


def _log_loss(y, score, w) -> float:
    # log(1 + exp(-s)) for y = 1, log(1 + exp(s)) for y = 0
    signed = np.where(y == 1, -score, score)
    return float(np.average(np.logaddexp(0, signed), weights=w))


def train_gradient_boosting(X, y, params: EnsembleParams,
                            sample_weight=None) -> Ensemble:
    """Stagewise regression trees on the negative gradient (y - p) of the
    logistic loss with Newton leaf values sum(r) / sum(p (1 - p)).

    The initial score is the log-odds of the weighted base rate; with zero
    rounds the model is that constant.
    """
    if params.kind != GRADIENT_BOOSTING:
        raise ValueError(f"expected gradient_boosting parameters, got {params.kind}")
    X, y, w = _check_training_data(X, y, sample_weight)
    n, m = X.shape
    Xu, yu, wu, _ = _compress(X, y, w)
    subset = _resolve_subset(params.max_features, m)
    rate = np.clip(np.average(yu, weights=wu), 1e-6, 1 - 1e-6)
    init = float(np.log(rate / (1 - rate)))
    score = np.full(len(Xu), init)
    loss_path = [_log_loss(yu, score, wu)]
    rng = np.random.default_rng(params.seed)
    trees = []
    for _ in range(params.n_trees):
        p = expit(score)
        r = yu - p
        h = p * (1 - p)

        def newton(rows, r=r, h=h):
            den = (wu[rows] * h[rows]).sum()
            return float((wu[rows] * r[rows]).sum() / max(den, _EPS))
        grower = _Grower(Xu, wu, params.max_depth, subset, rng,
                         _squared_error_gains(Xu, r, wu), newton)
        grower.grow(np.flatnonzero(wu > 0), 0, frozenset())
        tree = grower.tree()
        trees.append(tree)
        score = score + params.learning_rate * tree.predict_value(Xu)
        loss_path.append(_log_loss(yu, score, wu))
    log.debug(f"trained {params.describe()} on {n} rows, "
              f"loss {loss_path[0]:.4f} -> {loss_path[-1]:.4f}")
    return Ensemble(GRADIENT_BOOSTING, trees, params, m, init_score=init,
                    loss_path=loss_path)


def train_ensemble(X, y, params: EnsembleParams, sample_weight=None) -> Ensemble:
    if params.kind == RANDOM_FOREST:
        return train_random_forest(X, y, params, sample_weight)
    return train_gradient_boosting(X, y, params, sample_weight)


@dataclass(frozen=True)
class Rule:
    """A conjunction of (feature index, expected bit) literals from one
    root-to-leaf path; provenance is (tree index, leaf node id)."""
    literals: Tuple[Tuple[int, int], ...]
    provenance: Tuple[int, int] = (0, 0)

    def __post_init__(self):
        lits = tuple(sorted((int(j), int(b)) for j, b in self.literals))
        if not lits:
            raise ValueError("a rule needs at least one literal")
        if len({j for j, _ in lits}) != len(lits):
            raise ValueError("a feature appears twice in the rule")
        if any(b not in (0, 1) for _, b in lits):
            raise ValueError("expected bits must be 0 or 1")
        object.__setattr__(self, 'literals', lits)
        object.__setattr__(self, 'provenance', tuple(self.provenance))

    def __len__(self):
        return len(self.literals)

    def describe(self, space) -> str:
        """Rule text such as (NotSuccession(l,p),satisfied)=1 ∧ ..."""
        return " ∧ ".join(space.describe_literal(j, b) for j, b in self.literals)

    def to_dict(self) -> dict:
        return {'literals': [list(x) for x in self.literals],
                'provenance': list(self.provenance)}

    @classmethod
    def from_dict(cls, d: dict) -> "Rule":
        return cls(tuple(tuple(x) for x in d['literals']),
                   tuple(d['provenance']))


def extract_rules(ensemble: Ensemble, X_train=None,
                  tree_offset=0) -> List[Rule]:
    """One rule per root-to-leaf path of every tree, in tree and left-first
    leaf order. Literal sets seen before are skipped; with `X_train` given,
    rules covering no training row are dropped.
    """
    seen = set()
    rules = []
    for t, tree in enumerate(ensemble.trees):
        for leaf, path in tree.leaf_paths():
            if not path:
                continue
            rule = Rule(path, (t + tree_offset, leaf))
            if rule.literals in seen:
                continue
            seen.add(rule.literals)
            rules.append(rule)
    if X_train is not None and rules:
        covered = rule_matrix(X_train, rules).sum(axis=0) > 0
        dropped = int((~covered).sum())
        if dropped:
            log.debug(f"dropped {dropped} rules without training coverage")
        rules = [r for r, c in zip(rules, covered) if c]
    log.debug(f"extracted {len(rules)} rules from {len(ensemble.trees)} trees")
    return rules


def save_rules(rules: Sequence[Rule], path: str):
    with open(path, "w", encoding="utf-8") as f:
        json.dump({'format_version': FORMAT_VERSION,
                   'rules': [r.to_dict() for r in rules]}, f, indent=1)


def load_rules(path: str) -> List[Rule]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
    except (OSError, ValueError) as e:
        raise InputError(f"could not read rules from {path}: {e}")
    return [Rule.from_dict(r) for r in d['rules']]
