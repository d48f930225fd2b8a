# petrinet.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
Labelled Petri nets with initial and final markings, language enumeration
and PNML / DOT serialisation
"""

from collections import deque
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Set, Tuple

import graphviz
from lxml import etree

from .util import log, make_uuid, InputError, StateSpaceError

PNML_NET_TYPE = "http://www.pnml.org/version-2009/grammar/pnmlcoremodel"
INVISIBLE = "$invisible$"

Marking = Tuple[int, ...]


@dataclass(frozen=True)
class Transition:
    name: str
    label: Optional[str] = None

    @property
    def silent(self) -> bool:
        return self.label is None


class PetriNet:
    """Places and transitions are kept in insertion order; markings are
    tuples of token counts in place order."""

    def __init__(self, name: str = "net"):
        self.name = name
        self.places = []  # type: List[str]
        self.transitions = []  # type: List[Transition]
        self.arcs = []  # type: List[Tuple[str, str]]
        self.__place_index = {}
        self.__transition_index = {}
        self.initial = {}  # type: Dict[str, int]
        self.final = {}  # type: Dict[str, int]
        self.__compiled = None

    def add_place(self, name: str) -> str:
        if name in self.__place_index or name in self.__transition_index:
            raise ValueError(f"duplicate node '{name}'")
        self.__place_index[name] = len(self.places)
        self.places.append(name)
        self.__compiled = None
        return name

    def add_transition(self, name: str, label: Optional[str] = None) -> str:
        if name in self.__place_index or name in self.__transition_index:
            raise ValueError(f"duplicate node '{name}'")
        self.__transition_index[name] = len(self.transitions)
        self.transitions.append(Transition(name, label))
        self.__compiled = None
        return name

    def add_arc(self, source: str, target: str):
        p2t = source in self.__place_index and target in self.__transition_index
        t2p = source in self.__transition_index and target in self.__place_index
        if not (p2t or t2p):
            raise ValueError(f"arc {source} -> {target} must connect a place "
                             f"and a transition")
        self.arcs.append((source, target))
        self.__compiled = None

    def _compile(self):
        if self.__compiled is None:
            pre = [[] for _ in self.transitions]
            post = [[] for _ in self.transitions]
            for s, t in self.arcs:
                if s in self.__place_index:
                    pre[self.__transition_index[t]].append(self.__place_index[s])
                else:
                    post[self.__transition_index[s]].append(self.__place_index[t])
            self.__compiled = (pre, post)
        return self.__compiled

    def marking(self, tokens: Dict[str, int]) -> Marking:
        m = [0] * len(self.places)
        for p, n in tokens.items():
            m[self.__place_index[p]] = n
        return tuple(m)

    @property
    def initial_marking(self) -> Marking:
        return self.marking(self.initial)

    @property
    def final_marking(self) -> Marking:
        return self.marking(self.final)

    def enabled(self, m: Marking) -> List[int]:
        """Indices of the transitions enabled in marking m, in net order."""
        pre, _ = self._compile()
        out = []
        for t, places in enumerate(pre):
            need = {}
            for p in places:
                need[p] = need.get(p, 0) + 1
            if all(m[p] >= n for p, n in need.items()):
                out.append(t)
        return out

    def fire(self, m: Marking, t: int) -> Marking:
        pre, post = self._compile()
        m = list(m)
        for p in pre[t]:
            m[p] -= 1
        for p in post[t]:
            m[p] += 1
        return tuple(m)

    def visible_labels(self) -> Set[str]:
        return {t.label for t in self.transitions if not t.silent}

    def is_workflow_net(self) -> bool:
        """Single source place marked initially, single sink place marked
        finally."""
        targets = {t for _, t in self.arcs}
        sources = {s for s, _ in self.arcs}
        src = [p for p in self.places if p not in targets]
        snk = [p for p in self.places if p not in sources]
        return (len(src) == 1 and len(snk) == 1
                and self.initial == {src[0]: 1} and self.final == {snk[0]: 1})

    def __repr__(self):
        return (f"PetriNet({self.name}: {len(self.places)} places, "
                f"{len(self.transitions)} transitions)")


def language(net: PetriNet, max_len: int, cap=100000) -> Set[Tuple[str, ...]]:
    """All visible label sequences of length <= max_len that lead from the
    initial to the final marking.

    :raises StateSpaceError: when more than `cap` states are explored
    """
    start = (net.initial_marking, ())
    final = net.final_marking
    seen = {start}
    queue = deque([start])
    out = set()
    while queue:
        m, trace = queue.popleft()
        if m == final:
            out.add(trace)
        for t in net.enabled(m):
            tr = net.transitions[t]
            nxt = trace if tr.silent else trace + (tr.label,)
            if len(nxt) > max_len:
                continue
            state = (net.fire(m, t), nxt)
            if state in seen:
                continue
            seen.add(state)
            if len(seen) > cap:
                raise StateSpaceError("language enumeration exceeded the "
                                      "state cap", cap)
            queue.append(state)
    return out


def _text(parent, tag: str, value: str):
    el = etree.SubElement(parent, tag)
    etree.SubElement(el, "text").text = value
    return el


def pnml_tree(net: PetriNet) -> etree._ElementTree:
    root = etree.Element("pnml")
    net_el = etree.SubElement(root, "net", id=net.name, type=PNML_NET_TYPE)
    _text(net_el, "name", net.name)
    page = etree.SubElement(net_el, "page", id="n0")
    for p in net.places:
        pel = etree.SubElement(page, "place", id=p)
        _text(pel, "name", p)
        if net.initial.get(p):
            _text(pel, "initialMarking", str(net.initial[p]))
    for t in net.transitions:
        tel = etree.SubElement(page, "transition", id=t.name)
        _text(tel, "name", t.name if t.silent else t.label)
        if t.silent:
            etree.SubElement(tel, "toolspecific", tool="ProM", version="6.4",
                             activity=INVISIBLE,
                             localNodeID=make_uuid(net.name, t.name))
    for k, (s, t) in enumerate(net.arcs):
        etree.SubElement(page, "arc", id=f"arc_{k}", source=s, target=t)
    finals = etree.SubElement(net_el, "finalmarkings")
    marking = etree.SubElement(finals, "marking")
    for p, n in net.final.items():
        pel = etree.SubElement(marking, "place", idref=p)
        etree.SubElement(pel, "text").text = str(n)
    return etree.ElementTree(root)


def write_pnml(net: PetriNet, path: str):
    pnml_tree(net).write(str(path), pretty_print=True, xml_declaration=True,
                         encoding="UTF-8")
    log.debug(f"wrote {net} to {path}")


def _local(el) -> str:
    return etree.QName(el).localname


def _own_text(el) -> Optional[str]:
    for t in el:
        if isinstance(t.tag, str) and _local(t) == "text":
            return (t.text or "").strip()
    return None


def _child_text(el, tag: str) -> Optional[str]:
    for c in el.iter():
        if isinstance(c.tag, str) and _local(c) == tag:
            return _own_text(c)
    return None


def read_pnml(path: str) -> PetriNet:
    """Reads places, transitions (silent when marked $invisible$ or
    unlabelled), arcs, the initial marking and the <finalmarkings> section.
    Without final markings the places lacking outgoing arcs are used."""
    try:
        root = etree.parse(str(path)).getroot()
    except (OSError, etree.XMLSyntaxError) as e:
        raise InputError(f"could not parse PNML file {path}: {e}")
    net_el = next((e for e in root.iter() if isinstance(e.tag, str)
                   and _local(e) == "net"), None)
    if net_el is None:
        raise InputError(f"{path} contains no <net>")
    net = PetriNet(net_el.get("id", "net"))
    elements = [e for e in net_el.iter() if isinstance(e.tag, str)]
    for e in elements:
        if _local(e) == "place" and e.get("id") is not None:
            net.add_place(e.get("id"))
            n = _child_text(e, "initialMarking")
            if n:
                net.initial[e.get("id")] = int(n)
    for e in elements:
        if _local(e) == "transition":
            invisible = any(isinstance(c.tag, str) and _local(c) == "toolspecific"
                            and c.get("activity") == INVISIBLE for c in e)
            label = None if invisible else _child_text(e, "name")
            net.add_transition(e.get("id"), label or None)
    for e in elements:
        if _local(e) == "arc":
            try:
                net.add_arc(e.get("source"), e.get("target"))
            except ValueError as err:
                raise InputError(f"{path}: {err}")
    for e in elements:
        if _local(e) == "marking" and e.getparent() is not None \
                and _local(e.getparent()) == "finalmarkings":
            for p in e:
                if isinstance(p.tag, str) and _local(p) == "place":
                    net.final[p.get("idref")] = int(_own_text(p) or 1)
            break
    if not net.final:
        sources = {s for s, _ in net.arcs}
        net.final = {p: 1 for p in net.places if p not in sources}
        log.warning(f"{path} has no final marking; using the sink places")
    if not net.initial:
        raise InputError(f"{path} has no initial marking")
    return net


def to_dot(net: PetriNet) -> str:
    """Graphviz source of the net; silent transitions are drawn filled."""
    g = graphviz.Digraph(net.name, graph_attr={'rankdir': 'LR'})
    for p in net.places:
        label = "&#9679;" if net.initial.get(p) else ""
        shape = "doublecircle" if net.final.get(p) else "circle"
        g.node(p, label=label, shape=shape, width="0.3")
    for t in net.transitions:
        if t.silent:
            g.node(t.name, label="", shape="box", style="filled",
                   fillcolor="black", width="0.15")
        else:
            g.node(t.name, label=t.label, shape="box")
    for s, t in net.arcs:
        g.edge(s, t)
    return g.source


def write_dot(net: PetriNet, path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(to_dot(net))
