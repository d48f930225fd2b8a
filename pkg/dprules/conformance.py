# conformance.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
Conformance checking of event logs against workflow nets: optimal
alignments, trace and alignment fitness, escaping-edges precision over
aligned replays, and the discriminative metrics contrasting a model's
fitness on desirable and undesirable traces.

Costs are fixed: synchronous and silent moves cost 0, log moves and visible
model moves cost 1.
"""

import heapq
import itertools
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, asdict
from typing import Dict, Iterable, List, Optional, Set, Tuple

from .eventlog import EventLog
from .petrinet import PetriNet, Marking
from .util import log, InputError, StateSpaceError

SKIP = ">>"
SYNC = "sync"
LOG = "log"
MODEL = "model"
SILENT = "silent"

DEFAULT_CAP = 250000


@dataclass(frozen=True)
class Move:
    kind: str
    activity: Optional[str]
    transition: Optional[str]

    @property
    def cost(self) -> int:
        return 1 if self.kind in (LOG, MODEL) else 0

    def as_pair(self) -> Tuple[str, str]:
        """(log side, model side) with '>>' for the missing side."""
        if self.kind == LOG:
            return self.activity, SKIP
        if self.kind == SILENT:
            return SKIP, self.transition
        if self.kind == MODEL:
            return SKIP, self.activity
        return self.activity, self.activity


@dataclass(frozen=True)
class Alignment:
    moves: Tuple[Move, ...]
    cost: int

    @property
    def fits(self) -> bool:
        return self.cost == 0

    def log_projection(self) -> Tuple[str, ...]:
        return tuple(m.activity for m in self.moves if m.kind in (SYNC, LOG))

    def model_projection(self) -> Tuple[str, ...]:
        """Names of the fired transitions, silent ones included."""
        return tuple(m.transition for m in self.moves if m.kind != LOG)

    def __str__(self):
        return " ".join(f"({a},{b})" for a, b in (m.as_pair() for m in self.moves))


def align(trace: Iterable[str], net: PetriNet, cap=DEFAULT_CAP) -> Alignment:
    """Minimum-cost alignment of the activity sequence with a run of the net
    from its initial to its final marking.

    Best-first search over (marking, trace position). Successors are
    generated as synchronous moves, then model moves in transition order,
    then the log move, and equal costs are expanded in generation order, so
    the result is deterministic.
    :param trace: sequence of activity labels (or a Trace)
    :param net: PetriNet with initial and final marking
    :param cap: int, maximum number of search states
    :raises StateSpaceError: when more than `cap` states are reached
    """
    acts = tuple(getattr(trace, 'activities', trace))
    final = net.final_marking
    start = (net.initial_marking, 0)
    counter = itertools.count()
    best = {start: 0}
    back = {}
    heap = [(0, next(counter), start)]
    closed = set()
    while heap:
        cost, _, state = heapq.heappop(heap)
        if state in closed:
            continue
        closed.add(state)
        m, i = state
        if i == len(acts) and m == final:
            return Alignment(_moves(back, state), cost)
        enabled = net.enabled(m)
        successors = []
        if i < len(acts):
            for t in enabled:
                tr = net.transitions[t]
                if tr.label == acts[i]:
                    successors.append(((net.fire(m, t), i + 1),
                                       Move(SYNC, tr.label, tr.name)))
        for t in enabled:
            tr = net.transitions[t]
            kind = SILENT if tr.silent else MODEL
            successors.append(((net.fire(m, t), i), Move(kind, tr.label, tr.name)))
        if i < len(acts):
            successors.append(((m, i + 1), Move(LOG, acts[i], None)))
        for nxt, move in successors:
            c = cost + move.cost
            if nxt in closed or c >= best.get(nxt, c + 1):
                continue
            best[nxt] = c
            back[nxt] = (state, move)
            if len(best) > cap:
                raise StateSpaceError(f"alignment search exceeded {cap} states",
                                      cap)
            heapq.heappush(heap, (c, next(counter), nxt))
    raise InputError(f"net {net.name} cannot reach its final marking")


def _moves(back, state) -> Tuple[Move, ...]:
    out = []
    while state in back:
        state, move = back[state]
        out.append(move)
    return tuple(reversed(out))


def _variants(elog) -> Counter:
    if isinstance(elog, EventLog):
        return elog.variants()
    return Counter(tuple(t) for t in elog)


class Aligner:
    """Aligns the variants of logs against one net, computing each variant
    once."""

    def __init__(self, net: PetriNet, cap=DEFAULT_CAP):
        self.net = net
        self.cap = cap
        self.__cache = {}  # type: Dict[Tuple[str, ...], Alignment]

    def align(self, trace) -> Alignment:
        key = tuple(getattr(trace, 'activities', trace))
        if key not in self.__cache:
            self.__cache[key] = align(key, self.net, self.cap)
        return self.__cache[key]

    @property
    def empty_cost(self) -> int:
        """Cost of the cheapest run of the net, the model part of the
        worst-case alignment."""
        return self.align(()).cost

    def trace_fitness(self, trace) -> float:
        key = tuple(getattr(trace, 'activities', trace))
        denominator = len(key) + self.empty_cost
        if denominator == 0:
            return 1.0
        return 1.0 - self.align(key).cost / denominator


def _check_non_empty(variants: Counter):
    if sum(variants.values()) == 0:
        raise InputError("conformance needs a non-empty log")


def alignment_fitness(elog, net: PetriNet, aligner: Aligner = None) -> float:
    """Mean over traces of 1 - cost / (|trace| + cost of the cheapest model
    run)."""
    aligner = aligner or Aligner(net)
    variants = _variants(elog)
    _check_non_empty(variants)
    total = sum(n * aligner.trace_fitness(v) for v, n in variants.items())
    return total / sum(variants.values())


def trace_fitness(elog, net: PetriNet, aligner: Aligner = None) -> float:
    """Fraction of traces whose optimal alignment costs 0."""
    aligner = aligner or Aligner(net)
    variants = _variants(elog)
    _check_non_empty(variants)
    fitting = sum(n for v, n in variants.items() if aligner.align(v).fits)
    return fitting / sum(variants.values())


def _silent_closure(net: PetriNet, m: Marking, cap: int) -> Set[str]:
    """Visible labels enabled in any marking reachable from m through
    silent transitions."""
    seen = {m}
    queue = deque([m])
    labels = set()
    while queue:
        cur = queue.popleft()
        for t in net.enabled(cur):
            tr = net.transitions[t]
            if not tr.silent:
                labels.add(tr.label)
                continue
            nxt = net.fire(cur, t)
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > cap:
                    raise StateSpaceError("silent closure exceeded the state cap",
                                          cap)
                queue.append(nxt)
    return labels


def _replay(net: PetriNet, alignment: Alignment):
    """Visible labels of the model projection with the marking reached
    after each of them (the initial marking first)."""
    index = {t.name: k for k, t in enumerate(net.transitions)}
    m = net.initial_marking
    labels, markings = [], [m]
    for name in alignment.model_projection():
        t = index[name]
        m = net.fire(m, t)
        tr = net.transitions[t]
        if not tr.silent:
            labels.append(tr.label)
            markings.append(m)
    return tuple(labels), markings


def precision(elog, net: PetriNet, aligner: Aligner = None) -> float:
    """Escaping-edges precision over aligned replays.

    Every trace is replaced by the visible part of its aligned model run.
    For each prefix of these runs, including the complete runs, the
    activities enabled by the model (after silent steps) are compared with
    the activities that follow the prefix in the replayed log; the enabled
    ones never taken escape. Prefixes are weighted by the number of traces
    passing through them.
    :return: float in [0, 1]; 1 when the model enables nothing
    """
    aligner = aligner or Aligner(net)
    variants = _variants(elog)
    _check_non_empty(variants)
    weight = Counter()
    reflected = defaultdict(set)
    markings = defaultdict(set)
    for v, n in variants.items():
        labels, marks = _replay(net, aligner.align(v))
        for k in range(len(labels) + 1):
            prefix = labels[:k]
            weight[prefix] += n
            markings[prefix].add(marks[k])
            if k < len(labels):
                reflected[prefix].add(labels[k])
    enabled_total = 0
    escaping_total = 0
    for prefix, n in weight.items():
        enabled = set()
        for m in markings[prefix]:
            enabled |= _silent_closure(net, m, aligner.cap)
        enabled_total += n * len(enabled)
        escaping_total += n * len(enabled - reflected[prefix])
    if enabled_total == 0:
        return 1.0
    return 1.0 - escaping_total / enabled_total


def accuracy(fit_pos: float, fit_neg: float) -> float:
    """fitness on desirable traces minus fitness on undesirable ones"""
    return fit_pos - fit_neg


def f1(fit_pos: float, fit_neg: float) -> float:
    """Harmonic mean of the fitness on desirable traces and the unfitness
    on undesirable ones; 0 when both are 0."""
    unfit_neg = 1.0 - fit_neg
    denominator = fit_pos + unfit_neg
    if denominator <= 0:
        return 0.0
    return 2.0 * fit_pos * unfit_neg / denominator


@dataclass
class MetricsReport:
    t_fit_pos: float
    t_fit_neg: float
    a_fit_pos: float
    a_fit_neg: float
    prc: float
    a_acc: float
    t_acc: float
    a_f1: float
    t_f1: float

    @classmethod
    def from_fitness(cls, t_fit_pos, t_fit_neg, a_fit_pos, a_fit_neg,
                     prc) -> "MetricsReport":
        return cls(t_fit_pos, t_fit_neg, a_fit_pos, a_fit_neg, prc,
                   accuracy(a_fit_pos, a_fit_neg),
                   accuracy(t_fit_pos, t_fit_neg),
                   f1(a_fit_pos, a_fit_neg), f1(t_fit_pos, t_fit_neg))

    def as_record(self) -> dict:
        return asdict(self)


def discriminative_metrics(pos, neg, net: PetriNet,
                           cap=DEFAULT_CAP) -> MetricsReport:
    """All fitness values of the net on the desirable (pos) and undesirable
    (neg) traces, its precision on both together, and the accuracy and F1
    scores derived from them.

    :param pos: EventLog of desirable traces, non-empty
    :param neg: EventLog of undesirable traces, non-empty
    """
    if len(pos) == 0 or len(neg) == 0:
        raise InputError("discriminative metrics need desirable and "
                         "undesirable traces")
    aligner = Aligner(net, cap)
    report = MetricsReport.from_fitness(
        trace_fitness(pos, net, aligner), trace_fitness(neg, net, aligner),
        alignment_fitness(pos, net, aligner), alignment_fitness(neg, net, aligner),
        precision(list(_traces(pos)) + list(_traces(neg)), net, aligner))
    log.debug(f"{net.name}: {report}")
    return report


def _traces(elog) -> List[Tuple[str, ...]]:
    return [tuple(getattr(t, 'activities', t)) for t in elog]
