# discovery.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
Process discovery: an inductive miner with infrequency filtering producing
process trees, the translation of trees into workflow nets, and the miner
interface used to compare discovered or externally supplied models.
"""

import os
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Set, Tuple, Union

import networkx as nx

from .eventlog import EventLog
from .petrinet import PetriNet, read_pnml
from .util import log, InputError

Variants = Counter


class Operator(Enum):
    SEQUENCE = "->"
    XOR = "X"
    PARALLEL = "+"
    LOOP = "*"


@dataclass(frozen=True)
class ProcessTree:
    """An operator node with children, or a leaf carrying an activity
    (label None = silent step).

    XOR and PARALLEL children are kept sorted by their text so equal
    trees compare equal; LOOP keeps the do-part first.
    """
    operator: Optional[Operator] = None
    children: Tuple["ProcessTree", ...] = ()
    label: Optional[str] = None

    def __post_init__(self):
        if self.operator is None:
            if self.children:
                raise ValueError("a leaf has no children")
            return
        if self.label is not None:
            raise ValueError("an operator node has no label")
        if len(self.children) < 2:
            raise ValueError(f"operator {self.operator.name} needs at "
                             f"least 2 children")
        if self.operator in (Operator.XOR, Operator.PARALLEL):
            object.__setattr__(self, 'children',
                               tuple(sorted(self.children, key=str)))

    @classmethod
    def leaf(cls, label: Optional[str]) -> "ProcessTree":
        return cls(label=label)

    @classmethod
    def tau(cls) -> "ProcessTree":
        return cls()

    @classmethod
    def seq(cls, *children) -> "ProcessTree":
        return cls(Operator.SEQUENCE, tuple(children))

    @classmethod
    def xor(cls, *children) -> "ProcessTree":
        return cls(Operator.XOR, tuple(children))

    @classmethod
    def par(cls, *children) -> "ProcessTree":
        return cls(Operator.PARALLEL, tuple(children))

    @classmethod
    def loop(cls, do, *redo) -> "ProcessTree":
        return cls(Operator.LOOP, (do,) + tuple(redo))

    @property
    def is_leaf(self) -> bool:
        return self.operator is None

    def activities(self) -> Set[str]:
        if self.is_leaf:
            return set() if self.label is None else {self.label}
        out = set()
        for c in self.children:
            out |= c.activities()
        return out

    def __str__(self):
        if self.is_leaf:
            return "tau" if self.label is None else self.label
        return f"{self.operator.value}({', '.join(str(c) for c in self.children)})"


def flower_model(alphabet) -> ProcessTree:
    """loop(tau, a, b, ...): any sequence over the alphabet."""
    leaves = [ProcessTree.leaf(a) for a in sorted(alphabet)]
    return ProcessTree.loop(ProcessTree.tau(), *leaves)


class _DFG:
    """Directly-follows counts with start and end activities."""

    def __init__(self, variants: Variants):
        self.edges = Counter()
        self.starts = Counter()
        self.ends = Counter()
        self.activities = set()
        for trace, n in variants.items():
            if not trace:
                continue
            self.activities.update(trace)
            self.starts[trace[0]] += n
            self.ends[trace[-1]] += n
            for a, b in zip(trace, trace[1:]):
                self.edges[(a, b)] += n

    def filtered(self, f: float) -> "_DFG":
        """Drops edges below f times the strongest outgoing edge of their
        source activity."""
        out = _DFG(Counter())
        out.activities = set(self.activities)
        out.starts = Counter(self.starts)
        out.ends = Counter(self.ends)
        strongest = Counter()
        for (a, _), n in self.edges.items():
            strongest[a] = max(strongest[a], n)
        out.edges = Counter({e: n for e, n in self.edges.items()
                             if n >= f * strongest[e[0]]})
        return out

    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(sorted(self.activities))
        g.add_edges_from(e for e in sorted(self.edges))
        return g


def _sorted_groups(groups) -> List[List[str]]:
    return sorted((sorted(g) for g in groups), key=lambda g: g[0])


def _xor_cut(dfg: _DFG) -> Optional[List[List[str]]]:
    comps = list(nx.connected_components(dfg.graph().to_undirected()))
    return _sorted_groups(comps) if len(comps) > 1 else None


def _sequence_cut(dfg: _DFG) -> Optional[List[List[str]]]:
    g = dfg.graph()
    acts = sorted(dfg.activities)
    reach = {a: nx.descendants(g, a) for a in acts}
    merge = nx.Graph()
    merge.add_nodes_from(acts)
    for i, a in enumerate(acts):
        for b in acts[i + 1:]:
            ab, ba = b in reach[a], a in reach[b]
            if ab == ba:
                merge.add_edge(a, b)
    groups = [sorted(c) for c in nx.connected_components(merge)]
    if len(groups) < 2:
        return None

    def before(g1, g2):
        return all(b in reach[a] and a not in reach[b] for a in g1 for b in g2)
    ordered = []
    for grp in sorted(groups, key=lambda x: x[0]):
        pos = 0
        while pos < len(ordered) and before(ordered[pos], grp):
            pos += 1
        ordered.insert(pos, grp)
    for i in range(len(ordered)):
        for j in range(i + 1, len(ordered)):
            if not before(ordered[i], ordered[j]):
                return None
    return ordered


def _parallel_cut(dfg: _DFG) -> Optional[List[List[str]]]:
    acts = sorted(dfg.activities)
    neg = nx.Graph()
    neg.add_nodes_from(acts)
    for i, a in enumerate(acts):
        for b in acts[i + 1:]:
            if not ((a, b) in dfg.edges and (b, a) in dfg.edges):
                neg.add_edge(a, b)
    parts = _sorted_groups(nx.connected_components(neg))
    if len(parts) < 2:
        return None
    complete, lacking = [], []
    for p in parts:
        ok = any(a in dfg.starts for a in p) and any(a in dfg.ends for a in p)
        (complete if ok else lacking).append(p)
    if not complete:
        return None
    if lacking:
        complete[0] = sorted(complete[0] + [a for p in lacking for a in p])
    return _sorted_groups(complete) if len(complete) > 1 else None


def _loop_cut(dfg: _DFG) -> Optional[List[List[str]]]:
    do = set(dfg.starts) | set(dfg.ends)
    rest = sorted(dfg.activities - do)
    if not rest:
        return None
    g = dfg.graph().subgraph(rest).to_undirected()
    redo = []
    for comp in sorted((sorted(c) for c in nx.connected_components(g)),
                       key=lambda c: c[0]):
        comp_set = set(comp)
        valid = True
        for (a, b) in dfg.edges:
            if a in comp_set and b not in comp_set and b not in dfg.starts:
                valid = False
            if b in comp_set and a not in comp_set and a not in dfg.ends:
                valid = False
        if valid:
            redo.append(comp)
        else:
            do |= comp_set
    if not redo:
        return None
    return [sorted(do)] + redo


def _project(trace, acts) -> tuple:
    return tuple(a for a in trace if a in acts)


def _split_xor(variants: Variants, groups) -> List[Variants]:
    sets = [set(g) for g in groups]
    out = [Counter() for _ in groups]
    for trace, n in variants.items():
        counts = [sum(1 for a in trace if a in s) for s in sets]
        k = counts.index(max(counts))
        out[k][_project(trace, sets[k])] += n
    return out


def _split_sequence(variants: Variants, groups) -> List[Variants]:
    sets = [set(g) for g in groups]
    k = len(groups)
    out = [Counter() for _ in groups]
    for trace, n in variants.items():
        m = len(trace)
        # prefix[i][p]: events of group i among trace[:p]
        prefix = [[0] * (m + 1) for _ in range(k)]
        for i, s in enumerate(sets):
            for p, a in enumerate(trace):
                prefix[i][p + 1] = prefix[i][p] + (a in s)
        # best[i][q]: most events kept with groups < i covering trace[:q]
        best = [[-1] * (m + 1) for _ in range(k + 1)]
        back = [[0] * (m + 1) for _ in range(k + 1)]
        best[0][0] = 0
        for i in range(k):
            for q in range(m + 1):
                for p in range(q + 1):
                    if best[i][p] < 0:
                        continue
                    v = best[i][p] + prefix[i][q] - prefix[i][p]
                    if v > best[i + 1][q]:
                        best[i + 1][q] = v
                        back[i + 1][q] = p
        q = m
        bounds = [m]
        for i in range(k, 0, -1):
            q = back[i][q]
            bounds.append(q)
        bounds.reverse()
        for i in range(k):
            segment = trace[bounds[i]:bounds[i + 1]]
            out[i][_project(segment, sets[i])] += n
    return out


def _split_parallel(variants: Variants, groups) -> List[Variants]:
    sets = [set(g) for g in groups]
    out = [Counter() for _ in groups]
    for trace, n in variants.items():
        for i, s in enumerate(sets):
            out[i][_project(trace, s)] += n
    return out


def _split_loop(variants: Variants, groups) -> List[Variants]:
    do = set(groups[0])
    redo = [set(g) for g in groups[1:]]
    out = [Counter() for _ in groups]

    def close_redo(segment):
        counts = [sum(1 for a in segment if a in s) for s in redo]
        k = counts.index(max(counts))
        out[k + 1][_project(segment, redo[k])] += n

    for trace, n in variants.items():
        current, in_do = [], True
        for a in trace:
            if (a in do) == in_do:
                current.append(a)
                continue
            if in_do:
                out[0][_project(current, do)] += n
            else:
                close_redo(current)
            current, in_do = [a], not in_do
        if in_do:
            out[0][_project(current, do)] += n
        else:
            close_redo(current)
            out[0][()] += n
    return out


_CUTS = (
    (Operator.XOR, _xor_cut, _split_xor),
    (Operator.SEQUENCE, _sequence_cut, _split_sequence),
    (Operator.PARALLEL, _parallel_cut, _split_parallel),
    (Operator.LOOP, _loop_cut, _split_loop),
)


def _find_cut(dfg: _DFG):
    for op, detect, split in _CUTS:
        groups = detect(dfg)
        if groups is not None:
            return op, groups, split
    return None


def _split_tau_loop(variants: Variants, dfg: _DFG) -> Optional[Variants]:
    """Cuts traces wherever an end activity is directly followed by a start
    activity; None if no trace is cut."""
    out = Counter()
    cut_any = False
    for trace, n in variants.items():
        begin = 0
        for i in range(1, len(trace)):
            if trace[i - 1] in dfg.ends and trace[i] in dfg.starts:
                out[trace[begin:i]] += n
                begin = i
                cut_any = True
        out[trace[begin:]] += n
    return out if cut_any else None


def _mine(variants: Variants, f: float) -> ProcessTree:
    total = sum(variants.values())
    empty = variants.get((), 0)
    if empty == total:
        return ProcessTree.tau()
    if empty:
        rest = Counter({t: n for t, n in variants.items() if t})
        if f > 0 and empty / total < f:
            variants = rest
        else:
            return ProcessTree.xor(ProcessTree.tau(), _mine(rest, f))

    dfg = _DFG(variants)
    if len(dfg.activities) == 1:
        a = next(iter(dfg.activities))
        if all(len(t) == 1 for t in variants):
            return ProcessTree.leaf(a)
        return ProcessTree.loop(ProcessTree.leaf(a), ProcessTree.tau())

    found = _find_cut(dfg)
    if found is None and f > 0:
        found = _find_cut(dfg.filtered(f))
    if found is None:
        split = _split_tau_loop(variants, dfg)
        if split is not None:
            return ProcessTree.loop(_mine(split, f), ProcessTree.tau())
        log.debug(f"no cut over {sorted(dfg.activities)}; using a flower model")
        return flower_model(dfg.activities)
    op, groups, split = found
    children = [_mine(sub, f) for sub in split(variants, groups)]
    if op is Operator.LOOP:
        return ProcessTree.loop(*children)
    return ProcessTree(op, tuple(children))


def discover(elog: Union[EventLog, Variants], f: float = 0.2) -> ProcessTree:
    """Inductive mining with infrequency filtering.

    Cuts are tried in the order exclusive choice, sequence, parallel, loop,
    first on the complete directly-follows graph and then on the graph whose
    edges below f times the strongest outgoing edge of their source are
    removed. If neither yields a cut, a flower model over the remaining
    activities is returned.
    :param elog: EventLog or a Counter of activity tuples
    :param f: float in [0, 1], the noise threshold
    :return: ProcessTree
    """
    if not 0 <= f <= 1:
        raise ValueError(f"noise threshold must be in [0, 1], got {f}")
    variants = elog.variants() if isinstance(elog, EventLog) else Counter(elog)
    if sum(variants.values()) == 0:
        raise InputError("cannot discover a model from an empty log")
    tree = _mine(variants, f)
    log.debug(f"discovered {tree}")
    return tree


class _NetBuilder:

    def __init__(self, name):
        self.net = PetriNet(name)
        self.n_places = 0
        self.n_visible = 0
        self.n_silent = 0

    def place(self) -> str:
        self.n_places += 1
        return self.net.add_place(f"p_{self.n_places}")

    def transition(self, label: Optional[str]) -> str:
        if label is None:
            self.n_silent += 1
            return self.net.add_transition(f"tau_{self.n_silent}")
        self.n_visible += 1
        return self.net.add_transition(f"t_{self.n_visible}", label)

    def step(self, source, label, target):
        t = self.transition(label)
        self.net.add_arc(source, t)
        self.net.add_arc(t, target)
        return t

    def build(self, tree: ProcessTree, source: str, target: str):
        if tree.is_leaf:
            self.step(source, tree.label, target)
        elif tree.operator is Operator.SEQUENCE:
            cur = source
            for i, c in enumerate(tree.children):
                nxt = target if i == len(tree.children) - 1 else self.place()
                self.build(c, cur, nxt)
                cur = nxt
        elif tree.operator is Operator.XOR:
            for c in tree.children:
                self.build(c, source, target)
        elif tree.operator is Operator.PARALLEL:
            fork = self.transition(None)
            join = self.transition(None)
            self.net.add_arc(source, fork)
            self.net.add_arc(join, target)
            for c in tree.children:
                p_in, p_out = self.place(), self.place()
                self.net.add_arc(fork, p_in)
                self.net.add_arc(p_out, join)
                self.build(c, p_in, p_out)
        else:
            p_do, p_redo = self.place(), self.place()
            self.step(source, None, p_do)
            self.build(tree.children[0], p_do, p_redo)
            for c in tree.children[1:]:
                self.build(c, p_redo, p_do)
            self.step(p_redo, None, target)


def to_petri_net(tree: ProcessTree, name: str = "net") -> PetriNet:
    """Compositional translation into a workflow net with places `source`
    and `sink`: sequences chain places, choices share them, parallel
    branches sit between a silent fork and join, loops enter and leave
    through silent steps."""
    b = _NetBuilder(name)
    source = b.net.add_place("source")
    sink = b.net.add_place("sink")
    b.build(tree, source, sink)
    b.net.initial = {source: 1}
    b.net.final = {sink: 1}
    return b.net


class Miner:
    """Produces one net per named trace group."""
    name = "miner"

    def discover_net(self, elog: EventLog, group: str) -> Optional[PetriNet]:
        raise NotImplementedError


class InductiveMiner(Miner):

    def __init__(self, threshold: float = 0.2, name: str = None):
        self.threshold = threshold
        self.name = name or f"IMf{threshold:g}"

    def discover_net(self, elog: EventLog, group: str) -> Optional[PetriNet]:
        return to_petri_net(discover(elog, self.threshold), group)


class PnmlMiner(Miner):
    """Nets discovered elsewhere, read from `<directory>/<group>.pnml`."""

    def __init__(self, directory: str, name: str = None):
        self.directory = directory
        self.name = name or os.path.basename(os.path.normpath(directory))

    def discover_net(self, elog: EventLog, group: str) -> Optional[PetriNet]:
        path = os.path.join(self.directory, f"{group}.pnml")
        if not os.path.isfile(path):
            log.warning(f"{self.name}: no model {path}")
            return None
        return read_pnml(path)


def make_miner(entry: Union[str, dict], default_threshold=0.2) -> Miner:
    """Miner from a config entry: 'inductive', {'inductive': f} or
    {'pnml': directory, 'name': ...}."""
    if entry == 'inductive':
        return InductiveMiner(default_threshold)
    if isinstance(entry, dict):
        if 'inductive' in entry:
            f = entry['inductive']
            return InductiveMiner(default_threshold if f is None else float(f),
                                  entry.get('name'))
        if 'pnml' in entry:
            return PnmlMiner(entry['pnml'], entry.get('name'))
    raise ValueError(f"unknown miner specification {entry!r}")
