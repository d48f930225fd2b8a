"""Tests the evaluation and discovery of Declare constraints"""
import unittest

import numpy as np
import pytest

from dprules.declare import Constraint, Outcome, Template, \
    SUBSUMPTION_CHAINS, candidate_constraints, discover_constraints, \
    evaluate, evaluation_matrix, prune_subsumption
from dprules.eventlog import EventLog, Trace
from dprules.synthetic import example_log
from dprules.util import ConfigurationError, InputError

T = Template


def c(template, *args):
    return Constraint.of(template, *args)


def reference(trace, constraint):
    """Slow evaluator: list every activation with its target check."""
    trace = list(trace)
    n = len(trace)
    t = constraint.template
    if t.arity == 1:
        if n == 0:
            return Outcome.VAC_SATISFIED
        a = constraint.args[0]
        ok = a in trace if t is T.AtLeast1 else trace[-1] == a
        return Outcome.SATISFIED if ok else Outcome.VIOLATED

    a, b = constraint.args
    at_a = [i for i, x in enumerate(trace) if x == a]
    at_b = [j for j, x in enumerate(trace) if x == b]

    def response(i):
        return any(j > i for j in at_b)

    def alternate_response(i):
        next_a = min([k for k in at_a if k > i], default=n)
        return any(i < j < next_a for j in at_b)

    def chain_response(i):
        return i + 1 < n and trace[i + 1] == b

    def precedence(j):
        return any(i < j for i in at_a)

    def alternate_precedence(j):
        prev_b = max([k for k in at_b if k < j], default=-1)
        return any(prev_b < i < j for i in at_a)

    def chain_precedence(j):
        return j > 0 and trace[j - 1] == a

    checks = {
        T.RespondedExistence: [b in trace for _ in at_a],
        T.Response: [response(i) for i in at_a],
        T.AlternateResponse: [alternate_response(i) for i in at_a],
        T.ChainResponse: [chain_response(i) for i in at_a],
        T.Precedence: [precedence(j) for j in at_b],
        T.AlternatePrecedence: [alternate_precedence(j) for j in at_b],
        T.ChainPrecedence: [chain_precedence(j) for j in at_b],
        T.Succession: [response(i) for i in at_a]
        + [precedence(j) for j in at_b],
        T.AlternateSuccession: [alternate_response(i) for i in at_a]
        + [alternate_precedence(j) for j in at_b],
        T.ChainSuccession: [chain_response(i) for i in at_a]
        + [chain_precedence(j) for j in at_b],
        T.CoExistence: [b in trace for _ in at_a] + [a in trace for _ in at_b],
        T.NotCoExistence: [b not in trace for _ in at_a]
        + [a not in trace for _ in at_b],
        T.NotSuccession: [not response(i) for i in at_a],
        T.NotChainSuccession: [not chain_response(i) for i in at_a],
    }[t]
    if not checks:
        return Outcome.VAC_SATISFIED
    return Outcome.SATISFIED if all(checks) else Outcome.VIOLATED


class EvaluateTest(unittest.TestCase):

    def test_loan_example(self):
        trace = ("p", "l")
        self.assertEqual(evaluate(trace, c(T.CoExistence, "a", "p")),
                         Outcome.VIOLATED)
        self.assertEqual(evaluate(trace, c(T.ChainResponse, "a", "p")),
                         Outcome.VAC_SATISFIED)
        self.assertEqual(evaluate(trace, c(T.AtLeast1, "p")),
                         Outcome.SATISFIED)

    def test_not_succession(self):
        self.assertEqual(evaluate(("l", "a", "p"), c(T.NotSuccession, "l", "p")),
                         Outcome.VIOLATED)
        self.assertEqual(evaluate(("p", "a", "l"), c(T.NotSuccession, "l", "p")),
                         Outcome.SATISFIED)

    def test_empty_trace_is_vacuous(self):
        for constraint in candidate_constraints({"a", "b"}):
            self.assertEqual(evaluate((), constraint), Outcome.VAC_SATISFIED)

    def test_trace_objects(self):
        self.assertEqual(evaluate(Trace("x", ("a", "b")), c(T.End, "b")),
                         Outcome.SATISFIED)

    def test_alternate_templates(self):
        self.assertEqual(evaluate("abab", c(T.AlternateResponse, "a", "b")),
                         Outcome.SATISFIED)
        self.assertEqual(evaluate("aabb", c(T.AlternateResponse, "a", "b")),
                         Outcome.VIOLATED)
        self.assertEqual(evaluate("abb", c(T.AlternatePrecedence, "a", "b")),
                         Outcome.VIOLATED)


def test_randomized_against_reference():
    rng = np.random.default_rng(7)
    constraints = candidate_constraints({"a", "b", "c"})
    checked = 0
    for _ in range(60):
        trace = tuple(rng.choice(["a", "b", "c"], size=rng.integers(0, 8)))
        for constraint in constraints:
            assert evaluate(trace, constraint) == reference(trace, constraint), \
                f"{constraint} on {trace}"
            checked += 1
    assert checked >= 200


def test_subsumption_is_monotone():
    rng = np.random.default_rng(11)
    for _ in range(200):
        trace = tuple(rng.choice(["a", "b", "c"], size=rng.integers(1, 7)))
        for chain in SUBSUMPTION_CHAINS:
            for strict, weak in zip(chain, chain[1:]):
                for x, y in (("a", "b"), ("b", "c")):
                    if evaluate(trace, c(strict, x, y)) is Outcome.SATISFIED:
                        assert evaluate(trace, c(weak, x, y)) is not \
                            Outcome.VIOLATED


class ConstraintTest(unittest.TestCase):

    def test_textual_form(self):
        constraint = Constraint.parse("NotSuccession(O_Cre,O_Sel)")
        self.assertEqual(str(constraint), "NotSuccession(O_Cre,O_Sel)")
        self.assertEqual(constraint.template, T.NotSuccession)

    def test_symmetric_arguments(self):
        self.assertEqual(c(T.CoExistence, "b", "a"), c(T.CoExistence, "a", "b"))
        self.assertNotEqual(c(T.Response, "b", "a"), c(T.Response, "a", "b"))

    def test_invalid(self):
        with self.assertRaises(ValueError):
            Constraint.parse("Sometimes(a)")
        with self.assertRaises(ValueError):
            c(T.Response, "a", "a")
        with self.assertRaises(ValueError):
            c(T.End, "a", "b")


def test_discovery_on_single_trace():
    elog = EventLog([Trace("1", ("p", "a", "l"))])
    found = discover_constraints(elog, prune=False)
    for expected in (c(T.AtLeast1, "p"), c(T.ChainResponse, "p", "a"),
                     c(T.AlternateSuccession, "p", "a")):
        assert expected in found
    assert c(T.End, "p") not in found
    assert found == sorted(found, key=str)

    pruned = discover_constraints(elog)
    assert c(T.ChainSuccession, "p", "a") in pruned
    assert c(T.AlternateSuccession, "p", "a") not in pruned
    assert set(pruned) <= set(found)


def test_discovery_without_pairs():
    found = discover_constraints(EventLog([Trace("1", ("a",))]))
    assert found == [c(T.AtLeast1, "a"), c(T.End, "a")]


def test_discovery_on_example_log():
    elog, _ = example_log()
    assert c(T.NotSuccession, "l", "p") in discover_constraints(elog)


def test_discovery_errors():
    with pytest.raises(InputError):
        discover_constraints(EventLog([]))
    elog = EventLog([Trace("1", tuple("abcd"))])
    with pytest.raises(ConfigurationError):
        discover_constraints(elog, max_activities=3)


def test_pruning_keeps_distinguishing_weak_constraints():
    elog = EventLog([Trace("1", ("a", "b")), Trace("2", ("a", "c", "b"))])
    kept = prune_subsumption([c(T.ChainResponse, "a", "b"),
                              c(T.Response, "a", "b")], elog)
    assert kept == [c(T.ChainResponse, "a", "b"), c(T.Response, "a", "b")]
    single = EventLog([Trace("1", ("a", "b"))])
    assert prune_subsumption([c(T.ChainResponse, "a", "b"),
                              c(T.Response, "a", "b")], single) == \
        [c(T.ChainResponse, "a", "b")]


def test_evaluation_matrix_uses_outcome_codes():
    elog = EventLog([Trace("1", ("a",)), Trace("2", ("b",)), Trace("3", ())])
    m = evaluation_matrix(elog, [c(T.AtLeast1, "a")])
    assert m[:, 0].tolist() == [0, 1, 2]


if __name__ == "__main__":
    unittest.main()
