# regression.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
L1-regularised logistic regression over the rule-based encoding.

The loss is the weighted mean of log(1 + exp(-s (w.x + b))) with labels
mapped 0 -> s = -1 and 1 -> s = +1, plus lam * |w|_1; the bias is not
penalised. It is minimised with a monotone accelerated proximal gradient
method with momentum restarts, so the objective never increases between
iterations.
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.special import expit
from sklearn.model_selection import StratifiedKFold

from .util import log, InputError, ConfigurationError

DEFAULT_LAMBDA_GRID = (0.001, 0.01, 0.1, 1.0)
# fits made only to score a lambda on a validation fold
CV_KKT_TOLERANCE = 1e-4


@dataclass
class RegressionModel:
    weights: np.ndarray
    bias: float
    lam: float
    converged: bool = True
    n_iter: int = 0
    objective_path: List[float] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.lam <= 0:
            raise ValueError("lambda must be positive")

    @property
    def nonzero(self) -> np.ndarray:
        """Indices of rules with a nonzero weight."""
        return np.flatnonzero(self.weights != 0)

    def decision_function(self, R) -> np.ndarray:
        return np.asarray(R, dtype=float) @ self.weights + self.bias

    def predict(self, R) -> np.ndarray:
        R = np.atleast_2d(np.asarray(R, dtype=float))
        if R.shape[1] != len(self.weights):
            raise ValueError(f"expected {len(self.weights)} rule columns, "
                             f"got {R.shape[1]}")
        return (self.decision_function(R) >= 0).astype(int)

    def to_dict(self) -> dict:
        return {'lambda': self.lam, 'bias': self.bias,
                'weights': self.weights.tolist(), 'converged': self.converged,
                'n_iter': self.n_iter}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionModel":
        return cls(d['weights'], d['bias'], d['lambda'], d['converged'],
                   d['n_iter'])

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=1)

    @classmethod
    def load(cls, path: str) -> "RegressionModel":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except (OSError, ValueError, KeyError) as e:
            raise InputError(f"could not read regression model from {path}: {e}")


def _signs(labels) -> np.ndarray:
    y = np.asarray(labels)
    if not np.isin(y, (0, 1)).all():
        raise InputError("labels must be 0 or 1")
    return 2.0 * y - 1.0


def _normalised(sample_weight, n) -> np.ndarray:
    if sample_weight is None:
        return np.full(n, 1.0 / n)
    w = np.asarray(sample_weight, dtype=float)
    return w / w.sum()


def smooth_objective(weights, bias, R, labels, sample_weight=None) -> float:
    """Weighted mean logistic loss, without the penalty."""
    R = np.asarray(R, dtype=float)
    s = _signs(labels)
    d = _normalised(sample_weight, len(s))
    margin = s * (R @ weights + bias)
    return float(d @ np.logaddexp(0, -margin))


def smooth_gradient(weights, bias, R, labels,
                    sample_weight=None) -> Tuple[np.ndarray, float]:
    """Gradient of `smooth_objective` with respect to (weights, bias)."""
    R = np.asarray(R, dtype=float)
    s = _signs(labels)
    d = _normalised(sample_weight, len(s))
    margin = s * (R @ weights + bias)
    coef = -d * s * expit(-margin)
    return R.T @ coef, float(coef.sum())


def _compress(R, y, w):
    key = np.hstack([np.asarray(R, dtype=np.uint8),
                     np.asarray(y, dtype=np.uint8)[:, None]])
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    weights = np.bincount(np.asarray(inverse).reshape(-1), weights=w,
                          minlength=len(uniq))
    return uniq[:, :-1], uniq[:, -1].astype(int), weights


def _distinct_columns(A) -> Tuple[np.ndarray, np.ndarray]:
    """Columns kept (first of each group of identical columns, in order) and
    the kept position of every column."""
    if A.shape[1] == 0:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    _, first, inverse = np.unique(A.T, axis=0, return_index=True,
                                  return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return first[order], rank[np.asarray(inverse).reshape(-1)]


def _lipschitz(A, d, iters=30) -> float:
    """Power-iteration estimate of the largest eigenvalue of
    [A 1]' diag(d) [A 1] / 4; backtracking corrects an underestimate."""
    v = np.full(A.shape[1] + 1, 1.0 / np.sqrt(A.shape[1] + 1))
    top = 0.0
    for _ in range(iters):
        u = d * (A @ v[:-1] + v[-1])
        w = np.append(A.T @ u, u.sum())
        top = float(np.linalg.norm(w))
        if top == 0.0:
            break
        v = w / top
    return max(top / 4.0, 1e-12)


def fit(R, labels, lam: float, tolerance=1e-9, max_iter=10000,
        kkt_tolerance=1e-6, sample_weight=None,
        warm_start: RegressionModel = None) -> RegressionModel:
    """Fits the L1 logistic model.

    Identical rows are merged into weighted rows and identical rule columns
    into one column; a merged column's weight goes to its first rule. The
    smooth part is evaluated on a sparse matrix.

    :param R: (traces, rules) binary rule matrix
    :param labels: labels in {0, 1}; both classes must be present
    :param lam: float > 0, strength of the L1 penalty
    :param tolerance: relative objective decrease, |dF| <= tolerance *
        max(1, F), below which the optimality test is made
    :param kkt_tolerance: the fit has converged once the proximal gradient
        mapping is below kkt_tolerance * max(1, largest |weight|)
    :param max_iter: iteration cap; the model is returned with
        converged=False when it is reached
    :param sample_weight: optional row weights
    :param warm_start: a model over the same rules to start from
    :return: RegressionModel
    """
    if lam <= 0:
        raise ConfigurationError(f"lambda must be positive, got {lam}")
    y = np.asarray(labels).astype(int)
    R = np.asarray(R)
    if R.ndim != 2 or R.shape[0] != len(y):
        raise InputError(f"rule matrix has {R.shape[0]} rows "
                         f"but there are {len(y)} labels")
    _signs(y)
    if len(np.unique(y)) < 2:
        raise InputError("regression needs labels of both classes")
    w0 = np.ones(len(y)) if sample_weight is None \
        else np.asarray(sample_weight, dtype=float)
    A, y, d = _compress(R, y, w0)
    d = d / d.sum()
    s = 2.0 * y - 1.0
    m = A.shape[1]
    keep, group = _distinct_columns(A)
    A = sparse.csr_matrix(A[:, keep], dtype=float)
    k = len(keep)

    def smooth(x):
        margin = s * (A @ x[:k] + x[k])
        return float(d @ np.logaddexp(0, -margin)), margin

    def penalty(x):
        return lam * np.abs(x[:k]).sum()

    def prox(v, L):
        out = v.copy()
        out[:k] = np.sign(v[:k]) * np.maximum(np.abs(v[:k]) - lam / L, 0.0)
        return out

    def step(v, L):
        """Proximal gradient step from v, doubling L until the quadratic
        upper bound holds."""
        f_v, margin = smooth(v)
        coef = -d * s * expit(-margin)
        g = np.append(A.T @ coef, coef.sum())
        while True:
            z = prox(v - g / L, L)
            f_z, _ = smooth(z)
            diff = z - v
            if f_z <= f_v + g @ diff + 0.5 * L * (diff @ diff) + 1e-15:
                return z, f_z + penalty(z), L
            L *= 2.0

    x = np.zeros(k + 1)
    if warm_start is not None and len(warm_start.weights) == m:
        np.add.at(x, group, warm_start.weights)
        x[k] = warm_start.bias
    L = _lipschitz(A, d)
    f_x = smooth(x)[0] + penalty(x)
    path = [f_x]
    yk = x.copy()
    t = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z, f_z, L = step(yk, L)
        x_prev, f_prev = x, f_x
        if f_z <= f_x:
            x, f_x = z, f_z
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
            yk = x + ((t - 1.0) / t_next) * (x - x_prev)
            t = t_next
        else:
            # momentum overshot: restart from the best point
            yk, t = x.copy(), 1.0
        path.append(f_x)
        if f_prev - f_x <= tolerance * max(1.0, abs(f_x)):
            z_x, _, L = step(x, L)
            mapping = L * (x - z_x)
            scale = max(1.0, float(np.abs(x[:k]).max(initial=0.0)))
            if np.abs(mapping).max() <= kkt_tolerance * scale:
                converged = True
                break
    if not converged:
        log.warning(f"L1 regression did not converge within {max_iter} "
                    f"iterations (lambda {lam})")
    weights = np.zeros(m)
    weights[keep] = x[:k]
    weights[weights == 0] = 0.0
    model = RegressionModel(weights, float(x[k]), lam, converged, it, path)
    log.debug(f"lambda {lam}: {len(model.nonzero)} of {m} rules kept "
              f"({k} distinct) after {it} iterations")
    return model


def predict(model: RegressionModel, vector) -> int:
    """1 iff the model's score on the rule-encoded trace is >= 0."""
    vector = np.asarray(vector, dtype=float)
    if vector.ndim != 1 or len(vector) != len(model.weights):
        raise ValueError(f"expected a vector of {len(model.weights)} rule "
                         f"bits, got shape {vector.shape}")
    return int(vector @ model.weights + model.bias >= 0)


def importance(model: RegressionModel, rule_index: int) -> float:
    """Signed coefficient of the rule; positive values favour desirable."""
    if not 0 <= rule_index < len(model.weights):
        raise IndexError(f"rule index {rule_index} out of range "
                         f"for {len(model.weights)} rules")
    return float(model.weights[rule_index])


def accuracy(model: RegressionModel, R, labels) -> float:
    return float(np.mean(model.predict(R) == np.asarray(labels)))


def regularization_path(R, labels, grid: Sequence[float], sample_weight=None,
                        **kwargs) -> Dict[float, RegressionModel]:
    """Fits every lambda of the grid from the largest down, each warm
    started from the previous solution."""
    models = {}
    previous = None
    for lam in sorted(set(grid), reverse=True):
        previous = fit(R, labels, lam, sample_weight=sample_weight,
                       warm_start=previous, **kwargs)
        models[lam] = previous
    return models


def cv_folds(labels, folds: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Stratified, shuffled (train, validation) index pairs."""
    if folds < 2:
        raise ConfigurationError("cross-validation needs at least 2 folds")
    y = np.asarray(labels)
    skf = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    try:
        return list(skf.split(np.zeros(len(y)), y))
    except ValueError as e:
        raise InputError(f"cannot build {folds} folds: {e}")


def cross_validate(R, labels, grid: Sequence[float], folds=5,
                   seed=0) -> Dict[float, float]:
    """Mean validation accuracy per lambda."""
    if not grid:
        raise ConfigurationError("lambda grid must not be empty")
    R = np.asarray(R)
    y = np.asarray(labels)
    scores = {lam: [] for lam in grid}
    for train, valid in cv_folds(y, folds, seed):
        if len(np.unique(y[train])) < 2:
            raise InputError("a training fold lacks one of the classes")
        path = regularization_path(R[train], y[train], grid,
                                   kkt_tolerance=CV_KKT_TOLERANCE)
        for lam, model in path.items():
            scores[lam].append(accuracy(model, R[valid], y[valid]))
    return {lam: float(np.mean(v)) for lam, v in scores.items()}


def select_lambda(R, labels, grid: Sequence[float] = DEFAULT_LAMBDA_GRID,
                  folds=5, seed=0) -> float:
    """Lambda with the best mean validation accuracy; ties go to the larger
    (sparser) value."""
    scores = cross_validate(R, labels, grid, folds, seed)
    best = max(scores.values())
    chosen = max(lam for lam, acc in scores.items() if acc >= best - 1e-12)
    log.info(f"selected lambda {chosen} (cv accuracy {best:.4f})")
    return chosen


def coefficient_report(model: RegressionModel, rules: Sequence,
                       space=None) -> pd.DataFrame:
    """Two columns (rule text, coefficient) sorted by |coefficient|
    descending, ties in rule order."""
    texts = [r.describe(space) if space is not None else str(r.literals)
             for r in rules]
    df = pd.DataFrame({'Rule': texts, 'Coef': model.weights})
    order = np.argsort(-np.abs(model.weights), kind='stable')
    return df.iloc[order].reset_index(drop=True)
