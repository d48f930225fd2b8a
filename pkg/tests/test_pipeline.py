"""Tests the end-to-end pipeline, its resumable stages and the command line"""
import os
import time
import unittest

import numpy as np
import pytest
import yaml

from dprules.cli import EXIT_INPUT, EXIT_OK, main
from dprules.pipeline import PipelineConfig, run, run_stage
from dprules.synthetic import synthetic_log, write_csv
from dprules.util import ConfigurationError, InputError

SMALL_GRID = [{'kind': 'random_forest', 'n_trees': 1, 'max_depth': 2,
               'max_features': None, 'bootstrap': False}]


def example_config(output, **values):
    settings = {'dataset': 'EXAMPLE', 'evaluation_log': 'full',
                'ensemble_grid': SMALL_GRID, 'lambda_grid': [0.05],
                'cv_folds': 2, 'K': 2, 'output': str(output)}
    settings.update(values)
    return PipelineConfig.from_dict(settings)


def cluster_fitness(report):
    rows = report.metrics[report.metrics['Group'].str.startswith('cluster_')]
    return sorted((round(p, 3), round(n, 3))
                  for p, n in zip(rows['t-fit L+'], rows['t-fit L-']))


class ExampleRunTest(unittest.TestCase):

    @pytest.fixture(autouse=True)
    def _tmp(self, tmp_path):
        self.tmp_path = tmp_path

    def test_cluster_models_separate_the_classes(self):
        report = run(example_config(self.tmp_path / "run"))
        self.assertFalse(report.degenerate)
        self.assertEqual(len(report.metrics), 4)
        self.assertEqual(list(report.metrics['Group']),
                         ['cluster_1', 'cluster_2', 'desirable', 'undesirable'])
        self.assertEqual(cluster_fitness(report), [(0.0, 0.667), (0.667, 0.0)])
        self.assertEqual(len(report.clusters), 2)
        self.assertTrue(os.path.isfile(self.tmp_path / "run" / "report.yaml"))
        self.assertTrue(os.path.isfile(self.tmp_path / "run" / "models" /
                                       "cluster_1.pnml"))

    def test_runs_are_reproducible(self):
        run(example_config(self.tmp_path / "a"))
        run(example_config(self.tmp_path / "b"))
        for name in ("report.yaml", "report_metrics.csv",
                     os.path.join("models", "cluster_1.pnml"),
                     os.path.join("encoded", "constraints.txt")):
            a = (self.tmp_path / "a" / name).read_bytes()
            b = (self.tmp_path / "b" / name).read_bytes()
            self.assertEqual(a, b, name)

    def test_single_cluster(self):
        report = run(example_config(self.tmp_path / "one", K=1))
        self.assertEqual(len(report.clusters), 1)
        self.assertEqual(len(report.metrics), 3)

    def test_large_K_is_clamped(self):
        report = run(example_config(self.tmp_path / "many", K=50))
        n_rules = len(report.rules)
        self.assertEqual(len(report.clusters), n_rules)
        self.assertEqual(len(report.metrics), n_rules + 2)

    def test_stages_resume_from_artifacts(self):
        config = example_config(self.tmp_path / "staged")
        self.assertIsNone(run(config, until='cluster'))
        self.assertTrue(os.path.isfile(config.path('clusters.yaml')))
        self.assertFalse(os.path.isfile(config.path('report.yaml')))
        self.assertIsNone(run_stage(config, 'discover'))
        report = run_stage(config, 'evaluate')
        self.assertEqual(cluster_fitness(report), [(0.0, 0.667), (0.667, 0.0)])
        with open(config.path('report.yaml'), encoding="utf-8") as f:
            stored = yaml.safe_load(f)
        self.assertEqual(len(stored['metrics']), 4)
        self.assertEqual(stored['artifacts']['clusters'], 'clusters.yaml')

    def test_resume_without_train_artifacts(self):
        config = example_config(self.tmp_path / "partial")
        run(config, until='train')
        os.remove(config.path('encoded', 'cv_scores.csv'))
        with self.assertRaises(InputError):
            run_stage(config, 'cluster')
        run_stage(config, 'train')
        os.remove(config.path('encoded', 'ensemble_0.json'))
        with self.assertRaises(InputError):
            run_stage(config, 'cluster')


class PipelineConfigTest(unittest.TestCase):

    def test_defaults(self):
        config = PipelineConfig.from_dict({'dataset': 'EXAMPLE'})
        self.assertEqual(config.K, 3)
        self.assertEqual(len(config.ensemble_params()), 12)
        self.assertEqual(config.make_miners()[0].name, "IMf0.2")

    def test_ensemble_seeds_differ(self):
        seeds = [p.seed for p in
                 PipelineConfig.from_dict({'dataset': 'EXAMPLE'}).ensemble_params()]
        self.assertEqual(len(set(seeds)), len(seeds))

    def test_invalid(self):
        for values in ({'dataset': 'EXAMPLE', 'bogus': 1},
                       {'dataset': 'EXAMPLE', 'log': 'x.csv'},
                       {},
                       {'dataset': 'EXAMPLE', 'K': 0},
                       {'dataset': 'EXAMPLE', 'split_ratio': 1.0},
                       {'dataset': 'EXAMPLE', 'lambda_grid': [0.1, -1]},
                       {'dataset': 'EXAMPLE', 'cv_folds': 1},
                       {'dataset': 'EXAMPLE', 'config_version': 2},
                       {'dataset': 'EXAMPLE',
                        'ensemble_grid': [{'kind': 'random_forest', 'depth': 3}]},
                       {'dataset': 'EXAMPLE', 'miners': ['inductive', 'inductive']}):
            with self.assertRaises(ConfigurationError, msg=str(values)):
                PipelineConfig.from_dict(values)

    def test_overrides_win(self):
        config = PipelineConfig.load(None, {'dataset': 'EXAMPLE', 'K': 4,
                                            'seed': None})
        self.assertEqual(config.K, 4)
        self.assertEqual(config.seed, 0)


def _write_config(path, **values):
    settings = {'ensemble_grid': SMALL_GRID, 'lambda_grid': [0.05],
                'cv_folds': 2}
    settings.update(values)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(settings, f)
    return str(path)


def test_cli_on_generated_csv(tmp_path):
    assert main(["generate", "example", "--output", str(tmp_path)]) == EXIT_OK
    log_path = tmp_path / "example_log.csv"
    labels_path = tmp_path / "example_labels.csv"
    assert log_path.is_file() and labels_path.is_file()
    config = _write_config(tmp_path / "config.yaml", K=2,
                           evaluation_log='full')
    code = main(["run", "--config", config, "--log", str(log_path),
                 "--labels", str(labels_path),
                 "--output", str(tmp_path / "out")])
    assert code == EXIT_OK
    with open(tmp_path / "out" / "report.yaml", encoding="utf-8") as f:
        report = yaml.safe_load(f)
    assert len(report['metrics']) == 4
    assert report['config']['log'] == str(log_path)


def test_cli_input_errors(tmp_path):
    missing = ["run", "--log", str(tmp_path / "missing.csv"),
               "--label-threshold", "5 days", "--output", str(tmp_path / "o")]
    assert main(missing) == EXIT_INPUT
    config = _write_config(tmp_path / "bad.yaml", colour='blue')
    assert main(["run", "--config", config, "--dataset", "EXAMPLE",
                 "--output", str(tmp_path / "o")]) == EXIT_INPUT
    assert main(["evaluate", "--dataset", "EXAMPLE",
                 "--output", str(tmp_path / "empty")]) == EXIT_INPUT


def test_synthetic_log_run(tmp_path):
    elog, labels = synthetic_log(n_traces=300, seed=3)
    write_csv(elog, labels, str(tmp_path / "log.csv"),
              str(tmp_path / "labels.csv"))
    config = example_config(
        tmp_path / "out", dataset=None, log=str(tmp_path / "log.csv"),
        labels=str(tmp_path / "labels.csv"),
        ensemble_grid=[{'kind': 'random_forest', 'n_trees': 10,
                        'max_depth': 3},
                       {'kind': 'gradient_boosting', 'n_trees': 10,
                        'max_depth': 2}],
        lambda_grid=[0.01, 0.1], evaluation_log='test', K=3)
    report = run(config)
    assert len(report.clusters) <= 3
    assert len(report.metrics) == len(report.clusters) + 2
    values = report.metrics[['t-fit L+', 't-fit L-', 'prc']].to_numpy(dtype=float)
    present = ~np.isnan(values)
    assert ((values[present] >= 0) & (values[present] <= 1)).all()
    assert 0.0 <= report.ml_accuracy <= 1.0


@pytest.mark.slow
def test_default_configuration_on_the_bundled_log(tmp_path):
    config = PipelineConfig.from_dict({'dataset': 'SYNTHETIC',
                                       'output': str(tmp_path / "out")})
    assert config.cv_folds == 5 and len(config.ensemble_grid) == 12
    start = time.perf_counter()
    report = run(config)
    elapsed = time.perf_counter() - start
    assert elapsed < 300, f"default run took {elapsed:.0f} s"
    assert not report.degenerate
    assert 1 <= len(report.clusters) <= config.K
    assert len(report.metrics) == len(report.clusters) + 2


if __name__ == "__main__":
    unittest.main()
