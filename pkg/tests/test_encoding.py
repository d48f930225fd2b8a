"""Tests the feature space and the rule-based encoding"""
import os
import tempfile
import unittest

import numpy as np
import pytest

from dprules.declare import Constraint, Outcome, Template, \
    candidate_constraints, evaluate
from dprules.encoding import FeatureSpace, encode, encode_log, rule_holds, \
    rule_matrix
from dprules.eventlog import EventLog, Trace
from dprules.synthetic import example_log
from dprules.util import InputError

NOT_LP = Constraint.of(Template.NotSuccession, "l", "p")
NOT_AP = Constraint.of(Template.NotSuccession, "a", "p")


class FeatureSpaceTest(unittest.TestCase):

    def setUp(self):
        self.space = FeatureSpace([NOT_LP, NOT_AP])

    def test_feature_order(self):
        # constraints sorted by text, three outcomes each
        self.assertEqual(self.space.constraints, (NOT_AP, NOT_LP))
        self.assertEqual(len(self.space), 6)
        self.assertEqual(self.space.index(NOT_LP, Outcome.VAC_SATISFIED), 5)
        self.assertEqual(self.space.label(0), "NotSuccession(a,p)|satisfied")

    def test_unknown_constraint(self):
        with self.assertRaises(KeyError):
            self.space.index(Constraint.of(Template.End, "a"), Outcome.SATISFIED)

    def test_empty_space(self):
        with self.assertRaises(InputError):
            FeatureSpace([])

    def test_write_and_read(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "constraints.txt")
            self.space.write(path)
            self.assertEqual(FeatureSpace.read(path), self.space)


def _desirable_rule(space):
    return [(space.index(NOT_LP, Outcome.SATISFIED), 1),
            (space.index(NOT_AP, Outcome.SATISFIED), 1)]


def test_desirable_rule_on_example_traces():
    space = FeatureSpace([NOT_LP, NOT_AP])
    rule = _desirable_rule(space)
    assert rule_holds(encode(Trace("1", ("p", "a", "l")), space), rule) == 1
    assert rule_holds(encode(Trace("2", ("l", "p", "a")), space), rule) == 0
    assert rule_holds(encode(Trace("3", ("l", "p", "a")), space), []) == 1


def test_rule_index_out_of_range():
    space = FeatureSpace([NOT_LP])
    with pytest.raises(IndexError):
        rule_holds(encode(Trace("1", ("p",)), space), [(3, 1)])
    with pytest.raises(IndexError):
        rule_matrix(np.zeros((1, 3), dtype=np.uint8), [[(3, 1)]])


def test_encoding_is_one_hot():
    elog, _ = example_log()
    space = FeatureSpace(candidate_constraints(elog.alphabet))
    X = encode_log(elog, space)
    assert X.shape == (600, len(space))
    assert (X.reshape(600, -1, 3).sum(axis=2) == 1).all()
    for i in (0, 250, 599):
        assert np.array_equal(X[i], encode(elog[i], space))


def test_rule_matrix_matches_direct_evaluation():
    rng = np.random.default_rng(5)
    space = FeatureSpace(candidate_constraints({"a", "b", "c"}))
    traces = [Trace(str(k), tuple(rng.choice(["a", "b", "c"],
                                             size=rng.integers(0, 6))))
              for k in range(40)]
    X = encode_log(EventLog(traces), space)
    rules = []
    for _ in range(30):
        idx = rng.choice(len(space), size=rng.integers(1, 4), replace=False)
        rules.append([(int(j), int(rng.integers(0, 2))) for j in idx])
    R = rule_matrix(X, rules)
    for i, trace in enumerate(traces):
        for r, rule in enumerate(rules):
            expected = all(
                (evaluate(trace, space[j][0]) is space[j][1]) == bool(bit)
                for j, bit in rule)
            assert R[i, r] == int(expected)
            assert rule_holds(X[i], rule) == R[i, r]


def test_same_evaluations_give_same_vectors():
    space = FeatureSpace([NOT_LP, NOT_AP])
    a = encode(Trace("1", ("p", "a", "l")), space)
    b = encode(Trace("2", ("p", "l", "a")), space)
    assert np.array_equal(a, b)


if __name__ == "__main__":
    unittest.main()
