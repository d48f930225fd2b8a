"""Tests Jaccard distances, average-linkage clustering and log filtering"""
import unittest

import numpy as np
import pytest

from dprules.clustering import agglomerate, cut, filter_log, jaccard_matrix, \
    select_representatives
from dprules.declare import Constraint, Outcome, Template
from dprules.encoding import FeatureSpace
from dprules.regression import RegressionModel
from dprules.synthetic import example_log
from dprules.util import ConfigurationError


def brute_force_average_linkage(dm):
    """Merges recomputed from all pairwise distances at every step."""
    clusters = [(i,) for i in range(len(dm))]
    merges = []
    while len(clusters) > 1:
        best = None
        for x in range(len(clusters)):
            for y in range(x + 1, len(clusters)):
                a, b = sorted((clusters[x], clusters[y]))
                d = np.mean([dm[i, j] for i in a for j in b])
                key = (d, a[0], b[0])
                if best is None or d < best[0] - 1e-12 or \
                        (abs(d - best[0]) <= 1e-12 and key[1:] < best[1:3]):
                    best = (d, a[0], b[0], x, y)
        d, _, _, x, y = best
        merged = tuple(sorted(clusters[x] + clusters[y]))
        merges.append((merged, d))
        clusters = [c for k, c in enumerate(clusters) if k not in (x, y)]
        clusters.append(merged)
    return merges


def random_distances(rng, n=8):
    upper = np.triu(rng.random((n, n)), 1)
    return upper + upper.T


class AgglomerateTest(unittest.TestCase):

    def test_two_rules(self):
        dendrogram = agglomerate(np.array([[0, 0.4], [0.4, 0]]))
        self.assertEqual(len(dendrogram.steps), 1)
        self.assertAlmostEqual(dendrogram.steps[0].distance, 0.4)

    def test_three_rules(self):
        dm = np.array([[0, 0.1, 0.9], [0.1, 0, 0.9], [0.9, 0.9, 0]])
        steps = agglomerate(dm).steps
        self.assertEqual((steps[0].a, steps[0].b), (0, 1))
        self.assertAlmostEqual(steps[0].distance, 0.1)
        self.assertEqual({steps[1].a, steps[1].b}, {2, 3})
        self.assertAlmostEqual(steps[1].distance, 0.9)

    def test_ties_go_to_the_smallest_members(self):
        dm = np.full((4, 4), 0.5)
        np.fill_diagonal(dm, 0)
        dendrogram = agglomerate(dm)
        self.assertEqual(dendrogram.members()[4], (0, 1))
        self.assertEqual(dendrogram.members()[5], (0, 1, 2))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            dm = random_distances(rng)
            dendrogram = agglomerate(dm)
            members = dendrogram.members()
            expected = brute_force_average_linkage(dm)
            self.assertEqual(len(dendrogram.steps), 7)
            for s, (merged, d) in enumerate(expected):
                self.assertEqual(members[8 + s], merged)
                self.assertAlmostEqual(dendrogram.steps[s].distance, d,
                                       places=9)

    def test_scipy_linkage_layout(self):
        dm = random_distances(np.random.default_rng(1), 5)
        linkage = agglomerate(dm).to_linkage()
        self.assertEqual(linkage.shape, (4, 4))
        self.assertEqual(linkage[-1, 3], 5)

    def test_merge_step_table(self):
        dendrogram = agglomerate(random_distances(np.random.default_rng(1), 4))
        frame = dendrogram.to_frame()
        self.assertEqual(list(frame.columns),
                         ['step', 'cluster_a', 'cluster_b', 'distance', 'size'])
        self.assertEqual(list(frame['step']), [0, 1, 2])
        self.assertEqual(frame['size'].iloc[-1], 4)
        np.testing.assert_allclose(frame[['cluster_a', 'cluster_b', 'distance',
                                          'size']].to_numpy(),
                                   dendrogram.to_linkage())


class CutTest(unittest.TestCase):

    def setUp(self):
        self.dendrogram = agglomerate(random_distances(np.random.default_rng(2), 6))

    def test_extremes(self):
        self.assertEqual(cut(self.dendrogram, 6), [[i] for i in range(6)])
        self.assertEqual(cut(self.dendrogram, 1), [list(range(6))])

    def test_out_of_range(self):
        with self.assertRaises(ConfigurationError):
            cut(self.dendrogram, 0)
        with self.assertRaises(ConfigurationError):
            cut(self.dendrogram, 7)

    def test_clusters_are_nested(self):
        for K in range(1, 6):
            coarse = cut(self.dendrogram, K)
            fine = cut(self.dendrogram, K + 1)
            self.assertEqual(len(coarse), K)
            for cluster in fine:
                self.assertTrue(any(set(cluster) <= set(c) for c in coarse))


def test_jaccard_examples():
    R = np.array([[1, 1, 0, 1],
                  [1, 1, 0, 1],
                  [0, 0, 1, 0]])
    dm = jaccard_matrix(R)
    assert dm[0, 1] == 0
    assert dm[0, 2] == 1
    R = np.array([[1, 0], [1, 1], [0, 1]])
    assert jaccard_matrix(R)[0, 1] == pytest.approx(2 / 3)


def test_jaccard_is_a_metric():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        R = rng.integers(0, 2, (6, 4))
        R[rng.integers(0, 6), :] = 1
        dm = jaccard_matrix(R)
        assert np.allclose(dm, dm.T)
        assert np.allclose(np.diag(dm), 0)
        for i in range(4):
            for j in range(4):
                same = np.array_equal(R[:, i], R[:, j])
                assert (dm[i, j] == 0) == same
                for k in range(4):
                    assert dm[i, k] <= dm[i, j] + dm[j, k] + 1e-12


def _model(*coefs):
    return RegressionModel(np.array(coefs, dtype=float), 0.0, 0.1)


def test_representatives():
    report = select_representatives([[0, 1]], _model(1.11, -0.2))
    assert report.representatives == [0]
    report = select_representatives([[0, 1], [2]], _model(0.5, -0.5, 0.3))
    assert report.representatives == [0, 2]
    report = select_representatives([[1, 0]], _model(-0.2, -1.11))
    assert report.representatives == [1]
    assert report.K == 1


def test_support_columns():
    R = np.array([[1, 0], [1, 1], [0, 1], [0, 0]])
    report = select_representatives([[0], [1]], _model(1.0, -1.0), R,
                                    [1, 1, 0, 0])
    assert report.support_pos == {0: 1.0, 1: 0.5}
    assert report.support_neg == {0: 0.0, 1: 0.5}


class FilterLogTest(unittest.TestCase):

    def setUp(self):
        self.elog, self.labels = example_log()
        self.lp = Constraint.of(Template.NotSuccession, "l", "p")
        self.ap = Constraint.of(Template.NotSuccession, "a", "p")
        self.space = FeatureSpace([self.lp, self.ap])
        self.rule = [(self.space.index(self.lp, Outcome.SATISFIED), 1),
                     (self.space.index(self.ap, Outcome.SATISFIED), 1)]

    def test_desirable_rule(self):
        sub, labels = filter_log(self.elog, self.labels, self.rule, self.space)
        self.assertEqual(len(sub), 200)
        self.assertEqual(labels.counts(sub), (200, 0))
        self.assertEqual(set(sub.variants()),
                         {("p", "a", "l"), ("p", "l", "a")})
        again, _ = filter_log(sub, labels, self.rule, self.space)
        self.assertEqual(again, sub)

    def test_empty_rule_and_unsatisfiable_rule(self):
        whole, _ = filter_log(self.elog, self.labels, [], self.space)
        self.assertEqual(whole, self.elog)
        vacuous = [(self.space.index(self.lp, Outcome.VAC_SATISFIED), 1)]
        empty, labels = filter_log(self.elog, self.labels, vacuous, self.space)
        self.assertEqual(len(empty), 0)
        self.assertEqual(len(labels), 0)


if __name__ == "__main__":
    unittest.main()
