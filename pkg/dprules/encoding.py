# encoding.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
The (constraint x outcome) feature space, binary trace encoding and
evaluation of rule conjunctions on encoded traces
"""

from typing import Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd

from .declare import Constraint, Outcome, OUTCOMES, evaluate, evaluation_matrix
from .eventlog import EventLog, Trace
from .util import log, InputError


class FeatureSpace:
    """Ordered (constraint, outcome) pairs.

    Constraints are sorted by their textual form and every constraint
    contributes its three outcomes in the fixed order satisfied, violated,
    vac-satisfied, so feature 3k + s belongs to constraint k.
    """

    def __init__(self, constraints: Iterable[Constraint]):
        self.__constraints = tuple(sorted(set(constraints), key=str))
        if not self.__constraints:
            raise InputError("cannot build a feature space without constraints")
        self.__features = tuple((c, o) for c in self.__constraints
                                for o in OUTCOMES)

    def __len__(self):
        return len(self.__features)

    def __eq__(self, other):
        if not isinstance(other, FeatureSpace):
            return NotImplemented
        return self.__features == other.features

    def __hash__(self):
        return hash(self.__features)

    def __getitem__(self, i: int) -> Tuple[Constraint, Outcome]:
        return self.__features[i]

    @property
    def features(self) -> Tuple[Tuple[Constraint, Outcome], ...]:
        return self.__features

    @property
    def constraints(self) -> Tuple[Constraint, ...]:
        return self.__constraints

    def index(self, constraint: Constraint, outcome: Outcome) -> int:
        try:
            k = self.__constraints.index(constraint)
        except ValueError:
            raise KeyError(f"{constraint} is not in the feature space")
        return 3 * k + OUTCOMES.index(outcome)

    def label(self, i: int) -> str:
        c, o = self.__features[i]
        return f"{c}|{o.value}"

    @property
    def labels(self) -> List[str]:
        return [self.label(i) for i in range(len(self))]

    def describe_literal(self, i: int, bit: int) -> str:
        c, o = self.__features[i]
        return f"({c},{o.value})={bit}"

    def write(self, path: str):
        """One constraint per line in textual form."""
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for c in self.__constraints:
                f.write(f"{c}\n")

    @classmethod
    def read(cls, path: str) -> "FeatureSpace":
        with open(path, "r", encoding="utf-8") as f:
            return cls(Constraint.parse(line) for line in f if line.strip())


def build_feature_space(constraints: Iterable[Constraint]) -> FeatureSpace:
    space = FeatureSpace(constraints)
    log.debug(f"feature space with {len(space)} features "
              f"over {len(space.constraints)} constraints")
    return space


def encode(trace: Trace, space: FeatureSpace) -> np.ndarray:
    """Binary vector with bit 3k + s set iff constraint k evaluates to
    outcome s on the trace."""
    bits = np.zeros(len(space), dtype=np.uint8)
    for k, c in enumerate(space.constraints):
        bits[3 * k + evaluate(trace, c).code] = 1
    return bits


def encode_log(elog: EventLog, space: FeatureSpace) -> np.ndarray:
    """Encodes every trace; returns a (traces, features) uint8 matrix."""
    codes = evaluation_matrix(elog, space.constraints)
    X = np.zeros((len(elog), len(space)), dtype=np.uint8)
    if len(elog) == 0:
        return X
    rows = np.arange(len(elog))[:, None]
    cols = 3 * np.arange(len(space.constraints))[None, :] + codes
    X[rows, cols] = 1
    return X


def _literals(rule) -> Sequence[Tuple[int, int]]:
    return getattr(rule, 'literals', rule)


def rule_holds(vector: np.ndarray, rule) -> int:
    """1 iff every (feature index, expected bit) literal of the rule matches
    the encoded trace. The empty rule holds on every trace."""
    for j, bit in _literals(rule):
        if not 0 <= j < len(vector):
            raise IndexError(f"rule literal index {j} out of range for "
                             f"{len(vector)} features")
        if vector[j] != bit:
            return 0
    return 1


def rule_matrix(X: np.ndarray, rules: Sequence) -> np.ndarray:
    """Rule-based encoding: (traces, rules) uint8 matrix of `rule_holds`."""
    X = np.asarray(X)
    R = np.ones((X.shape[0], len(rules)), dtype=np.uint8)
    for r, rule in enumerate(rules):
        lits = list(_literals(rule))
        if not lits:
            continue
        idx = np.array([j for j, _ in lits])
        if idx.max() >= X.shape[1] or idx.min() < 0:
            raise IndexError(f"rule {r} refers to a feature outside of "
                             f"{X.shape[1]} features")
        bits = np.array([b for _, b in lits], dtype=X.dtype)
        R[:, r] = np.all(X[:, idx] == bits, axis=1)
    return R


def encoded_frame(elog: EventLog, space: FeatureSpace,
                  X: np.ndarray = None) -> pd.DataFrame:
    """Encoded log as a data frame, rows = case ids, columns = feature labels."""
    if X is None:
        X = encode_log(elog, space)
    df = pd.DataFrame(X, columns=space.labels)
    df.insert(0, 'case', elog.case_ids)
    return df


def write_encoded(path: str, elog: EventLog, space: FeatureSpace,
                  X: np.ndarray = None):
    encoded_frame(elog, space, X).to_csv(path, index=False, lineterminator="\n")
    log.info(f"wrote encoded log to {path}")
