"""Tests inductive mining, the tree-to-net translation and the miners"""
import unittest
from collections import Counter

import numpy as np
import pytest

from dprules.conformance import trace_fitness
from dprules.discovery import InductiveMiner, PnmlMiner, ProcessTree, \
    discover, flower_model, make_miner, to_petri_net
from dprules.eventlog import EventLog, Trace
from dprules.petrinet import language, write_pnml
from dprules.synthetic import example_log
from dprules.util import InputError

P = ProcessTree


def leaves(*labels):
    return [P.leaf(a) for a in labels]


class ProcessTreeTest(unittest.TestCase):

    def test_choice_and_parallel_children_are_sorted(self):
        a, b = leaves("a", "b")
        self.assertEqual(P.xor(b, a), P.xor(a, b))
        self.assertEqual(P.par(b, a), P.par(a, b))
        self.assertNotEqual(P.seq(b, a), P.seq(a, b))
        self.assertEqual(str(P.seq(a, P.par(b, P.tau()))), "->(a, +(b, tau))")

    def test_invalid_nodes(self):
        with self.assertRaises(ValueError):
            P.seq(P.leaf("a"))
        with self.assertRaises(ValueError):
            ProcessTree(label="a", children=(P.tau(),))

    def test_activities(self):
        tree = P.loop(P.seq(*leaves("a", "b")), P.tau())
        self.assertEqual(tree.activities(), {"a", "b"})


class DiscoverTest(unittest.TestCase):

    def test_sequence_then_parallel(self):
        tree = discover(Counter({("p", "a", "l"): 1, ("p", "l", "a"): 1}), 0.0)
        self.assertEqual(tree, P.seq(P.leaf("p"), P.par(*leaves("a", "l"))))
        net = to_petri_net(tree)
        self.assertEqual(language(net, 3), {("p", "a", "l"), ("p", "l", "a")})

    def test_example_log_is_fully_parallel(self):
        elog, _ = example_log()
        tree = discover(elog)
        self.assertEqual(tree, P.par(*leaves("a", "l", "p")))
        self.assertEqual(len(language(to_petri_net(tree), 3)), 6)

    def test_repeated_block_becomes_a_loop(self):
        tree = discover(Counter({("a", "b"): 1, ("a", "b", "a", "b"): 1}), 0.0)
        self.assertEqual(tree, P.loop(P.seq(*leaves("a", "b")), P.tau()))

    def test_single_activity(self):
        self.assertEqual(discover(Counter({("a",): 3}), 0.0), P.leaf("a"))
        self.assertEqual(discover(Counter({("a",): 1, ("a", "a"): 1}), 0.0),
                         P.loop(P.leaf("a"), P.tau()))

    def test_infrequent_edges_are_filtered(self):
        variants = Counter({("a", "b"): 20, ("c", "d"): 20, ("a", "d"): 1})
        self.assertEqual(discover(variants, 0.2),
                         P.xor(P.seq(*leaves("a", "b")),
                               P.seq(*leaves("c", "d"))))
        self.assertEqual(discover(variants, 0.0), flower_model("abcd"))

    def test_infrequent_skips_are_filtered(self):
        variants = Counter({("a", "b", "c"): 20, ("a", "c"): 1})
        self.assertEqual(discover(variants, 0.2), P.seq(*leaves("a", "b", "c")))
        self.assertEqual(discover(variants, 0.0),
                         P.seq(P.leaf("a"), P.xor(P.tau(), P.leaf("b")),
                               P.leaf("c")))

    def test_errors(self):
        with self.assertRaises(InputError):
            discover(EventLog([]))
        with self.assertRaises(ValueError):
            discover(Counter({("a",): 1}), 1.5)


def test_without_filtering_every_trace_fits():
    rng = np.random.default_rng(13)
    for _ in range(50):
        traces = [tuple(rng.choice(list("abcd"), size=rng.integers(1, 6)))
                  for _ in range(rng.integers(1, 5))]
        tree = discover(Counter(traces), 0.0)
        assert discover(Counter(traces), 0.0) == tree
        net = to_petri_net(tree)
        assert net.is_workflow_net()
        assert trace_fitness(traces, net) == 1.0, f"{tree} on {traces}"


def test_leaf_net():
    net = to_petri_net(P.leaf("a"), "single")
    assert net.name == "single"
    assert len(net.places) == 2 and len(net.transitions) == 1
    assert language(net, 3) == {("a",)}


def test_flower_net_accepts_every_word():
    net = to_petri_net(flower_model({"a", "b"}))
    assert len(language(net, 2)) == 7
    assert net.visible_labels() == {"a", "b"}


def test_transition_names():
    net = to_petri_net(P.par(*leaves("a", "b")))
    names = sorted(t.name for t in net.transitions)
    assert names == ["t_1", "t_2", "tau_1", "tau_2"]


def test_make_miner(tmp_path):
    assert make_miner('inductive').name == "IMf0.2"
    miner = make_miner({'inductive': 0})
    assert isinstance(miner, InductiveMiner) and miner.threshold == 0.0
    assert miner.name == "IMf0"
    assert make_miner({'inductive': None}, 0.3).threshold == 0.3
    pnml = make_miner({'pnml': str(tmp_path), 'name': "external"})
    assert isinstance(pnml, PnmlMiner) and pnml.name == "external"
    with pytest.raises(ValueError):
        make_miner('alpha')


def test_pnml_miner_reads_group_files(tmp_path):
    net = to_petri_net(P.seq(*leaves("p", "a")), "cluster_0")
    write_pnml(net, str(tmp_path / "cluster_0.pnml"))
    miner = PnmlMiner(str(tmp_path))
    elog = EventLog([Trace("1", ("p", "a"))])
    assert language(miner.discover_net(elog, "cluster_0"), 2) == {("p", "a")}
    assert miner.discover_net(elog, "cluster_1") is None


if __name__ == "__main__":
    unittest.main()
