# declare.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
Declare templates, their three-valued evaluation on single traces,
discovery of the constraints satisfied in a log and subsumption pruning.
"""

import re
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from itertools import permutations, combinations
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from .eventlog import EventLog, Trace
from .util import log, InputError, ConfigurationError


class Template(Enum):
    """The template catalog. Values are (name, arity, symmetric)."""

    AtLeast1 = ("AtLeast1", 1, False)
    End = ("End", 1, False)
    RespondedExistence = ("RespondedExistence", 2, False)
    Response = ("Response", 2, False)
    AlternateResponse = ("AlternateResponse", 2, False)
    ChainResponse = ("ChainResponse", 2, False)
    Precedence = ("Precedence", 2, False)
    AlternatePrecedence = ("AlternatePrecedence", 2, False)
    ChainPrecedence = ("ChainPrecedence", 2, False)
    Succession = ("Succession", 2, False)
    AlternateSuccession = ("AlternateSuccession", 2, False)
    ChainSuccession = ("ChainSuccession", 2, False)
    CoExistence = ("CoExistence", 2, True)
    NotCoExistence = ("NotCoExistence", 2, True)
    NotSuccession = ("NotSuccession", 2, False)
    NotChainSuccession = ("NotChainSuccession", 2, False)

    def __init__(self, label, arity, symmetric):
        self.label = label
        self.arity = arity
        self.symmetric = symmetric

    @classmethod
    def from_name(cls, name: str) -> "Template":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown Declare template '{name}'")


class Outcome(Enum):
    SATISFIED = "satisfied"
    VIOLATED = "violated"
    VAC_SATISFIED = "vac-satisfied"

    @property
    def code(self) -> int:
        return OUTCOMES.index(self)


# fixed outcome order, also the order of the features of one constraint
OUTCOMES = (Outcome.SATISFIED, Outcome.VIOLATED, Outcome.VAC_SATISFIED)

# strict -> weak
SUBSUMPTION_CHAINS = (
    (Template.ChainResponse, Template.AlternateResponse, Template.Response,
     Template.RespondedExistence),
    (Template.ChainPrecedence, Template.AlternatePrecedence,
     Template.Precedence),
    (Template.ChainSuccession, Template.AlternateSuccession,
     Template.Succession, Template.CoExistence),
    (Template.NotSuccession, Template.NotChainSuccession),
)

_TEXT = re.compile(r"^\s*(\w+)\((.*)\)\s*$")


@dataclass(frozen=True)
class Constraint:
    """A template instantiated with activity names.

    Use `Constraint.of` to build constraints of symmetric templates; it
    sorts their arguments so that CoExistence(b,a) == CoExistence(a,b).
    """
    template: Template
    args: Tuple[str, ...]

    def __post_init__(self):
        if len(self.args) != self.template.arity:
            raise ValueError(f"{self.template.label} takes "
                             f"{self.template.arity} argument(s), "
                             f"got {len(self.args)}")
        if self.template.arity == 2 and self.args[0] == self.args[1]:
            raise ValueError(f"{self.template.label} needs two distinct "
                             f"activities, got {self.args[0]} twice")

    @classmethod
    def of(cls, template: Template, *args: str) -> "Constraint":
        args = tuple(str(a) for a in args)
        if template.symmetric:
            args = tuple(sorted(args))
        return cls(template, args)

    @classmethod
    def parse(cls, text: str) -> "Constraint":
        """Reads the textual form `Template(arg1[,arg2])`."""
        m = _TEXT.match(text)
        if m is None:
            raise ValueError(f"not a constraint: '{text}'")
        template = Template.from_name(m.group(1))
        args = [a.strip() for a in m.group(2).split(",")]
        return cls.of(template, *args)

    def __str__(self):
        return f"{self.template.label}({','.join(self.args)})"

    def __lt__(self, other):
        return str(self) < str(other)


class _Positions:
    """Occurrence positions per activity of one activity sequence."""

    def __init__(self, acts: Sequence[str]):
        self.acts = tuple(acts)
        self.n = len(self.acts)
        self.pos = {}  # type: Dict[str, List[int]]
        for i, a in enumerate(self.acts):
            self.pos.setdefault(a, []).append(i)

    def of(self, a: str) -> List[int]:
        return self.pos.get(a, [])


def _response(p: _Positions, a, b) -> bool:
    pa, pb = p.of(a), p.of(b)
    return bool(pb) and pb[-1] > pa[-1]


def _alternate_response(p: _Positions, a, b) -> bool:
    pa, pb = p.of(a), p.of(b)
    for k, i in enumerate(pa):
        limit = pa[k + 1] if k + 1 < len(pa) else p.n
        j = bisect_right(pb, i)
        if j >= len(pb) or pb[j] >= limit:
            return False
    return True


def _chain_response(p: _Positions, a, b) -> bool:
    return all(i + 1 < p.n and p.acts[i + 1] == b for i in p.of(a))


def _precedence(p: _Positions, a, b) -> bool:
    pa, pb = p.of(a), p.of(b)
    return bool(pa) and pa[0] < pb[0]


def _alternate_precedence(p: _Positions, a, b) -> bool:
    pa, pb = p.of(a), p.of(b)
    for k, j in enumerate(pb):
        start = pb[k - 1] if k > 0 else -1
        i = bisect_right(pa, start)
        if i >= len(pa) or pa[i] >= j:
            return False
    return True


def _chain_precedence(p: _Positions, a, b) -> bool:
    return all(j > 0 and p.acts[j - 1] == a for j in p.of(b))


_HALVES = {
    Template.Succession: (_response, _precedence),
    Template.AlternateSuccession: (_alternate_response, _alternate_precedence),
    Template.ChainSuccession: (_chain_response, _chain_precedence),
}


def _evaluate(p: _Positions, c: Constraint) -> Outcome:
    t = c.template
    if t.arity == 1:
        if p.n == 0:
            return Outcome.VAC_SATISFIED
        a = c.args[0]
        if t is Template.AtLeast1:
            ok = a in p.pos
        else:
            ok = p.acts[-1] == a
        return Outcome.SATISFIED if ok else Outcome.VIOLATED

    a, b = c.args
    has_a, has_b = a in p.pos, b in p.pos
    if t in _HALVES:
        if not has_a and not has_b:
            return Outcome.VAC_SATISFIED
        resp, prec = _HALVES[t]
        ok = (not has_a or resp(p, a, b)) and (not has_b or prec(p, a, b))
        return Outcome.SATISFIED if ok else Outcome.VIOLATED
    if t is Template.CoExistence or t is Template.NotCoExistence:
        if not has_a and not has_b:
            return Outcome.VAC_SATISFIED
        both = has_a and has_b
        ok = both if t is Template.CoExistence else not both
        return Outcome.SATISFIED if ok else Outcome.VIOLATED

    # activated by b
    if t in (Template.Precedence, Template.AlternatePrecedence,
             Template.ChainPrecedence):
        if not has_b:
            return Outcome.VAC_SATISFIED
        if t is Template.Precedence:
            ok = _precedence(p, a, b)
        elif t is Template.AlternatePrecedence:
            ok = _alternate_precedence(p, a, b)
        else:
            ok = _chain_precedence(p, a, b)
        return Outcome.SATISFIED if ok else Outcome.VIOLATED

    # activated by a
    if not has_a:
        return Outcome.VAC_SATISFIED
    if t is Template.RespondedExistence:
        ok = has_b
    elif t is Template.Response:
        ok = _response(p, a, b)
    elif t is Template.AlternateResponse:
        ok = _alternate_response(p, a, b)
    elif t is Template.ChainResponse:
        ok = _chain_response(p, a, b)
    elif t is Template.NotSuccession:
        ok = not has_b or p.of(b)[-1] < p.of(a)[0]
    elif t is Template.NotChainSuccession:
        ok = not any(i + 1 < p.n and p.acts[i + 1] == b for i in p.of(a))
    else:
        raise ValueError(f"no semantics for template {t}")
    return Outcome.SATISFIED if ok else Outcome.VIOLATED


def evaluate(trace: Union[Trace, Sequence[str]], constraint: Constraint) -> Outcome:
    """Evaluates the constraint on the trace (or a plain activity sequence).

    Returns VAC_SATISFIED when no activation occurs, VIOLATED when some
    activation misses its target and SATISFIED otherwise.
    """
    acts = trace.activities if isinstance(trace, Trace) else trace
    return _evaluate(_Positions(acts), constraint)


def evaluation_matrix(elog: EventLog, constraints: Sequence[Constraint]) -> np.ndarray:
    """Outcome codes (see `OUTCOMES`) as an int8 array of shape
    (traces, constraints). Each distinct variant is evaluated once."""
    constraints = list(constraints)
    rows = {}
    for acts in elog.variants():
        p = _Positions(acts)
        rows[acts] = np.array([_evaluate(p, c).code for c in constraints],
                              dtype=np.int8)
    out = np.zeros((len(elog), len(constraints)), dtype=np.int8)
    for i, t in enumerate(elog):
        out[i] = rows[t.activities]
    return out


def candidate_constraints(alphabet: Iterable[str]) -> List[Constraint]:
    """All instantiations of the catalog over the given activities."""
    acts = sorted(alphabet)
    out = []
    for t in Template:
        if t.arity == 1:
            out.extend(Constraint(t, (a,)) for a in acts)
        elif t.symmetric:
            out.extend(Constraint(t, pair) for pair in combinations(acts, 2))
        else:
            out.extend(Constraint(t, pair) for pair in permutations(acts, 2))
    return out


def discover_constraints(elog: EventLog, max_activities=100,
                         prune=True) -> List[Constraint]:
    """Returns the constraints satisfied (non-vacuously) by at least one
    trace of the log, sorted by their textual form.

    :param elog: EventLog, non-empty
    :param max_activities: int, cap on the alphabet size; pair enumeration
        is quadratic in it
    :param prune: bool, apply `prune_subsumption` on the result
    """
    if len(elog) == 0:
        raise InputError("cannot discover constraints in an empty log")
    if len(elog.alphabet) > max_activities:
        raise ConfigurationError(
            f"log has {len(elog.alphabet)} activities, more than the cap of "
            f"{max_activities}; filter infrequent activities or raise "
            f"max_activities")
    candidates = candidate_constraints(elog.alphabet)
    satisfied = np.zeros(len(candidates), dtype=bool)
    for acts in elog.variants():
        p = _Positions(acts)
        for k, c in enumerate(candidates):
            if not satisfied[k] and _evaluate(p, c) is Outcome.SATISFIED:
                satisfied[k] = True
    found = [c for k, c in enumerate(candidates) if satisfied[k]]
    log.debug(f"{len(found)} of {len(candidates)} candidate constraints "
              f"are satisfied in the log")
    if prune:
        found = prune_subsumption(found, elog)
    return sorted(found, key=str)


def _weaker(c: Constraint) -> List[Constraint]:
    """Constraints that `c` subsumes according to the chains."""
    out = []
    for chain in SUBSUMPTION_CHAINS:
        if c.template in chain:
            k = chain.index(c.template)
            out.extend(Constraint.of(w, *c.args) for w in chain[k + 1:])
    return out


def prune_subsumption(constraints: Iterable[Constraint],
                      elog: EventLog) -> List[Constraint]:
    """Drops every weaker constraint whose evaluation over all traces of the
    log equals that of a stricter constraint of the same subsumption chain.

    Pairs are judged against the given set, so a dropped constraint can still
    be compared with its own weaker relatives.
    """
    constraints = sorted(set(constraints), key=str)
    if not constraints:
        return []
    matrix = evaluation_matrix(elog, constraints)
    column = {c: matrix[:, k] for k, c in enumerate(constraints)}
    removed = set()
    for c in constraints:
        for w in _weaker(c):
            if w in column and np.array_equal(column[c], column[w]):
                removed.add(w)
    log.debug(f"subsumption pruning removed {len(removed)} constraints")
    return [c for c in constraints if c not in removed]
