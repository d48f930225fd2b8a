"""Tests tree ensembles and the extraction of rules from them"""
import unittest

import numpy as np
import pytest

from dprules.declare import candidate_constraints
from dprules.encoding import FeatureSpace, encode_log, rule_matrix
from dprules.ensemble import Ensemble, EnsembleParams, Rule, \
    GRADIENT_BOOSTING, RANDOM_FOREST, extract_rules, train_ensemble, \
    train_gradient_boosting, train_random_forest, train_tree
from dprules.synthetic import example_log
from dprules.util import InputError


def separable(n=20):
    """Feature 0 equals the label, feature 1 alternates."""
    X = np.array([[1, 0], [1, 1], [0, 0], [0, 1]] * (n // 4), dtype=np.uint8)
    return X, X[:, 0].astype(int)


class TrainTreeTest(unittest.TestCase):

    def test_perfect_feature_gives_stump(self):
        rng = np.random.default_rng(0)
        y = np.array([0, 1] * 10)
        X = np.column_stack([rng.integers(0, 2, 20), y,
                             rng.integers(0, 2, 20)]).astype(np.uint8)
        tree = train_tree(X, y, max_depth=3)
        self.assertEqual(tree.depth, 1)
        self.assertEqual(int(tree.feature[0]), 1)
        self.assertTrue(np.array_equal(tree.predict_value(X), y))

    def test_single_class_gives_leaf(self):
        X, _ = separable()
        tree = train_tree(X, np.ones(len(X), dtype=int), max_depth=3)
        self.assertEqual(tree.n_nodes, 1)
        self.assertEqual(list(tree.leaf_paths()), [(0, ())])

    def test_errors(self):
        with self.assertRaises(InputError):
            train_tree(np.zeros((0, 2)), [], max_depth=2)
        with self.assertRaises(InputError):
            train_tree(np.zeros((2, 2)), [0, 2], max_depth=2)
        with self.assertRaises(ValueError):
            train_tree(np.zeros((2, 2)), [0, 1], max_depth=0)


class RandomForestTest(unittest.TestCase):

    def test_single_tree_without_bootstrap_is_a_tree(self):
        rng = np.random.default_rng(1)
        X = rng.integers(0, 2, (30, 6)).astype(np.uint8)
        y = (X[:, 0] & X[:, 2]) | X[:, 4]
        params = EnsembleParams(RANDOM_FOREST, n_trees=1, max_depth=3,
                                max_features=None, bootstrap=False)
        forest = train_random_forest(X, y, params)
        self.assertEqual(forest.trees[0], train_tree(X, y, 3))

    def test_fixed_seed_is_deterministic(self):
        rng = np.random.default_rng(2)
        X = rng.integers(0, 2, (50, 8)).astype(np.uint8)
        y = X[:, 1] ^ X[:, 3]
        params = EnsembleParams(RANDOM_FOREST, n_trees=10, max_depth=3, seed=9)
        a = train_ensemble(X, y, params)
        b = train_ensemble(X, y, params)
        self.assertEqual(a.trees, b.trees)
        self.assertEqual(a.oob_error, b.oob_error)

    def test_separable_data_has_no_oob_error(self):
        X, y = separable(40)
        params = EnsembleParams(RANDOM_FOREST, n_trees=25, max_depth=2,
                                max_features=None, seed=4)
        forest = train_random_forest(X, y, params)
        self.assertEqual(forest.oob_error, 0.0)
        self.assertTrue(np.array_equal(forest.predict(X), y))
        proba = forest.predict_proba(X)
        self.assertTrue(((proba >= 0) & (proba <= 1)).all())
        self.assertTrue(np.array_equal(proba >= 0.5, y == 1))


class GradientBoostingTest(unittest.TestCase):

    def test_zero_rounds_is_base_rate(self):
        X, _ = separable(4)
        y = np.array([1, 1, 1, 0])
        params = EnsembleParams(GRADIENT_BOOSTING, n_trees=0)
        model = train_gradient_boosting(X, y, params)
        self.assertAlmostEqual(model.init_score, np.log(3.0))
        self.assertTrue(np.allclose(model.decision_function(X), np.log(3.0)))

    def test_zero_learning_rate_keeps_loss(self):
        X, y = separable()
        params = EnsembleParams(GRADIENT_BOOSTING, n_trees=5, max_depth=2,
                                learning_rate=0.0)
        model = train_gradient_boosting(X, y, params)
        self.assertTrue(min(model.loss_path) >= model.loss_path[0] - 1e-12)

    def test_separable_data_is_learned(self):
        X, y = separable()
        params = EnsembleParams(GRADIENT_BOOSTING, n_trees=20, max_depth=2,
                                learning_rate=0.1)
        model = train_ensemble(X, y, params)
        self.assertEqual(float(np.mean(model.predict(X) == y)), 1.0)
        proba = model.predict_proba(X)
        score = model.decision_function(X)
        self.assertTrue(np.allclose(proba, 1 / (1 + np.exp(-score))))
        self.assertTrue(all(b <= a + 1e-12 for a, b in
                            zip(model.loss_path, model.loss_path[1:])))


def test_invalid_params():
    with pytest.raises(ValueError):
        EnsembleParams("bagging")
    with pytest.raises(ValueError):
        EnsembleParams(RANDOM_FOREST, n_trees=0)


def test_depth_one_tree_gives_two_rules():
    X, y = separable()
    params = EnsembleParams(RANDOM_FOREST, n_trees=1, max_depth=1,
                            max_features=None, bootstrap=False)
    rules = extract_rules(train_ensemble(X, y, params), X)
    assert [r.literals for r in rules] == [((0, 0),), ((0, 1),)]


def test_identical_trees_give_no_duplicates():
    X, y = separable()
    params = EnsembleParams(RANDOM_FOREST, n_trees=3, max_depth=2,
                            max_features=None, bootstrap=False)
    forest = train_ensemble(X, y, params)
    rules = extract_rules(forest)
    assert len({r.literals for r in rules}) == len(rules)
    assert all(r.provenance[0] == 0 for r in rules)


def test_example_tree_separates_the_dominant_variants():
    elog, labels = example_log()
    space = FeatureSpace(candidate_constraints(elog.alphabet))
    X = encode_log(elog, space)
    y = labels.array(elog)
    params = EnsembleParams(RANDOM_FOREST, n_trees=1, max_depth=2,
                            max_features=None, bootstrap=False)
    rules = extract_rules(train_ensemble(X, y, params), X)
    assert len(rules) == 4
    R = rule_matrix(X, rules)
    assert sorted(R.sum(axis=0).tolist()) == [100, 100, 200, 200]
    starts_with_p = np.array([t.activities[0] == "p" for t in elog])
    assert any(np.array_equal(R[:, r] == 1, starts_with_p)
               for r in range(len(rules)))
    assert any(set(y[R[:, r] == 1]) == {0} and R[:, r].sum() == 200
               for r in range(len(rules)))


def test_rule_validation():
    with pytest.raises(ValueError):
        Rule(())
    with pytest.raises(ValueError):
        Rule(((1, 1), (1, 0)))
    assert Rule(((5, 1), (2, 0))).literals == ((2, 0), (5, 1))


def test_ensemble_file(tmp_path):
    X, y = separable()
    model = train_ensemble(X, y, EnsembleParams(GRADIENT_BOOSTING, n_trees=3))
    model.save(str(tmp_path / "ensemble.json"))
    loaded = Ensemble.load(str(tmp_path / "ensemble.json"))
    assert np.allclose(loaded.decision_function(X), model.decision_function(X))
    with pytest.raises(InputError):
        Ensemble.load(str(tmp_path / "missing.json"))


if __name__ == "__main__":
    unittest.main()
