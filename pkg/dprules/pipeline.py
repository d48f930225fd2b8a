# pipeline.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
The end-to-end pipeline: labelling and splitting a log, encoding traces by
Declare constraints, selecting an ensemble and a penalty by cross
validation, weighting the extracted rules, clustering them, discovering a
model per cluster and evaluating all models against the desirable and
undesirable traces.

Every stage writes its artifacts below the output directory and can be
resumed from the artifacts of the stages before it.
"""

import os
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from . import df as dfm
from .clustering import Dendrogram, MergeStep, agglomerate, cut, \
    filter_log, jaccard_matrix, select_representatives
from .conformance import discriminative_metrics
from .declare import discover_constraints
from .discovery import Miner, make_miner
from .encoding import FeatureSpace, build_feature_space, encode_log, \
    rule_matrix, write_encoded
from .ensemble import Ensemble, EnsembleParams, Rule, RANDOM_FOREST, \
    GRADIENT_BOOSTING, extract_rules, load_rules, save_rules, train_ensemble
from .eventlog import EventLog, LabelFunction, filter_by_duration, \
    label_by_duration, read_labels, read_log, split_train_test, undersample
from .figures import emit_figures, metrics_figure, save_figure
from .petrinet import PetriNet, read_pnml, write_dot, write_pnml
from .regression import CV_KKT_TOLERANCE, RegressionModel, accuracy, \
    cv_folds, fit, regularization_path
from .util import log, datapath, derive_seed, ensure_dir, load_yaml, \
    write_yaml, round_floats, generate_description, ConfigurationError, \
    DegenerateResultError, InputError, StageError


CONFIG_VERSION = 1
STAGES = ('encode', 'train', 'cluster', 'discover', 'evaluate')
DESIRABLE = 'desirable'
UNDESIRABLE = 'undesirable'
_ENSEMBLE_KEYS = {'kind', 'n_trees', 'max_depth', 'max_features',
                  'learning_rate', 'bootstrap'}


@dataclass
class PipelineConfig:
    """All settings of a run; see data/defaults.yaml for the defaults."""
    config_version: int
    log: Optional[str]
    dataset: Optional[str]
    columns: dict
    labels: Optional[str]
    label_threshold: Optional[str]
    desirable_side: str
    min_duration: Optional[str]
    split_ratio: float
    seed: int
    max_activities: int
    prune_subsumption: bool
    ensemble_grid: list
    lambda_grid: list
    cv_folds: int
    pool_rules: bool
    K: int
    discovery_threshold: float
    miners: list
    evaluation_log: str
    state_cap: int
    output: str

    @staticmethod
    def defaults() -> dict:
        return load_yaml(datapath + "defaults.yaml")

    @classmethod
    def from_dict(cls, values: dict, base: dict = None) -> "PipelineConfig":
        """Config from the defaults (or `base`) overridden by `values`.

        :raises ConfigurationError: on unknown keys or invalid values
        """
        d = dict(base if base is not None else cls.defaults())
        unknown = sorted(set(values) - set(d))
        if unknown:
            raise ConfigurationError(f"unknown configuration keys: "
                                     f"{', '.join(unknown)}")
        d.update(values)
        config = cls(**d)
        config.validate()
        return config

    @classmethod
    def load(cls, path: str = None, overrides: dict = None) -> "PipelineConfig":
        """Defaults, then the YAML file, then the overrides (CLI flags)."""
        values = load_yaml(path) if path else {}
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(values)

    def validate(self):
        if self.config_version != CONFIG_VERSION:
            raise ConfigurationError(f"config_version {self.config_version} is "
                                     f"not supported (expected {CONFIG_VERSION})")
        if (self.log is None) == (self.dataset is None):
            raise ConfigurationError("give exactly one of 'log' and 'dataset'")
        if not isinstance(self.seed, int):
            raise ConfigurationError(f"seed must be an integer, got {self.seed!r}")
        if not 0 < self.split_ratio < 1:
            raise ConfigurationError(f"split_ratio must be in (0, 1), "
                                     f"got {self.split_ratio}")
        if not isinstance(self.K, int) or self.K < 1:
            raise ConfigurationError(f"K must be a positive integer, got {self.K!r}")
        if not 0 <= self.discovery_threshold <= 1:
            raise ConfigurationError("discovery_threshold must be in [0, 1]")
        if not self.lambda_grid or any(lam <= 0 for lam in self.lambda_grid):
            raise ConfigurationError("lambda_grid must hold positive values")
        if self.cv_folds < 2:
            raise ConfigurationError("cv_folds must be at least 2")
        if self.evaluation_log not in ('test', 'full'):
            raise ConfigurationError("evaluation_log must be 'test' or 'full'")
        if self.desirable_side not in ('below', 'above'):
            raise ConfigurationError("desirable_side must be 'below' or 'above'")
        if not self.miners:
            raise ConfigurationError("at least one miner is needed")
        self.ensemble_params()
        self.make_miners()

    def ensemble_params(self) -> List[EnsembleParams]:
        """The grid settings, each with its own seed derived from the run
        seed."""
        if not self.ensemble_grid:
            raise ConfigurationError("ensemble_grid must not be empty")
        out = []
        for i, entry in enumerate(self.ensemble_grid):
            unknown = set(entry) - _ENSEMBLE_KEYS
            if unknown:
                raise ConfigurationError(f"ensemble_grid[{i}]: unknown keys "
                                         f"{', '.join(sorted(unknown))}")
            try:
                out.append(EnsembleParams(
                    seed=derive_seed(self.seed, 'ensemble', str(i)), **entry))
            except (TypeError, ValueError) as e:
                raise ConfigurationError(f"ensemble_grid[{i}]: {e}")
        return out

    def make_miners(self) -> List[Miner]:
        try:
            miners = [make_miner(m, self.discovery_threshold) for m in self.miners]
        except ValueError as e:
            raise ConfigurationError(str(e))
        names = [m.name for m in miners]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"miner names must be distinct: {names}")
        return miners

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def save(self, path: str):
        write_yaml(self.to_dict(), path)

    def path(self, *parts: str) -> str:
        return os.path.join(self.output, *parts)


@contextmanager
def _stage(name: str):
    """Wraps unexpected failures of a stage into a StageError; input,
    configuration and degenerate-result errors pass unchanged."""
    log.info(f"stage {name}")
    try:
        yield
    except (InputError, ConfigurationError, DegenerateResultError, StageError):
        raise
    except Exception as e:
        log.error(f"stage {name} failed: {e}")
        raise StageError(name, e) from e


def load_input(config: PipelineConfig) -> Tuple[EventLog, LabelFunction]:
    """Reads the log and labels its cases by the label file, the duration
    threshold or, for registered datasets, their stored settings."""
    from . import Dataset, get_log
    meta = {}
    if config.dataset is not None:
        dataset = Dataset.get_class(config.dataset)
        meta = dataset.get_metadata()
        elog, labels = get_log(dataset)
    else:
        elog = read_log(config.log, config.columns)
        labels = None
    if config.min_duration is not None:
        elog = filter_by_duration(elog, config.min_duration)
    if config.labels is not None:
        labels = read_labels(config.labels)
    elif config.label_threshold is not None:
        labels = label_by_duration(elog, config.label_threshold,
                                   config.desirable_side)
    elif labels is None:
        raise ConfigurationError("no labels: give 'labels' or 'label_threshold'")
    if meta:
        log.info(f"using dataset {meta['name']}")
    labels.check_total(elog)
    return elog, labels.restrict(elog)


@dataclass
class Encoded:
    """The labelled log, its split and its encoding (all traces, log
    order)."""
    elog: EventLog
    labels: LabelFunction
    train: EventLog
    test: EventLog
    space: FeatureSpace
    X: np.ndarray
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {c: i for i, c in enumerate(self.elog.case_ids)}

    def rows(self, sub: EventLog) -> np.ndarray:
        return np.array([self.index[c] for c in sub.case_ids], dtype=int)

    def matrix(self, sub: EventLog) -> np.ndarray:
        return self.X[self.rows(sub)]

    def y(self, sub: EventLog) -> np.ndarray:
        return self.labels.array(sub)


def encode_stage(config: PipelineConfig) -> Encoded:
    with _stage('encode'):
        elog, labels = load_input(config)
        train_full, test = split_train_test(elog, labels, config.split_ratio,
                                            derive_seed(config.seed, 'split'))
        train = undersample(train_full, labels,
                            derive_seed(config.seed, 'undersample'))
        constraints = discover_constraints(train, config.max_activities,
                                           config.prune_subsumption)
        space = build_feature_space(constraints)
        X = encode_log(elog, space)
        enc = Encoded(elog, labels, train, test, space, X)

        ensure_dir(config.path('encoded'))
        space.write(config.path('encoded', 'constraints.txt'))
        in_train = set(train.case_ids)
        in_test = set(test.case_ids)
        split = pd.DataFrame({
            'case': elog.case_ids,
            'label': labels.array(elog),
            'part': ['test' if c in in_test else 'train' for c in elog.case_ids],
            'used': [int(c in in_train or c in in_test) for c in elog.case_ids]})
        split.to_csv(config.path('encoded', 'split.csv'), index=False,
                     lineterminator="\n")
        write_encoded(config.path('encoded', 'encoded.csv'), elog, space, X)
        log.info(f"encoded {len(elog)} traces with {len(space.constraints)} "
                 f"constraints ({len(space)} features)")
    return enc


def load_encoded(config: PipelineConfig) -> Encoded:
    """Rebuilds the encode stage result from its artifacts."""
    try:
        space = FeatureSpace.read(config.path('encoded', 'constraints.txt'))
        split = pd.read_csv(config.path('encoded', 'split.csv'),
                            dtype={'case': str})
        frame = pd.read_csv(config.path('encoded', 'encoded.csv'),
                            dtype={'case': str})
    except FileNotFoundError as e:
        raise InputError(f"run the encode stage first: {e}")
    if list(frame.columns[1:]) != space.labels:
        raise InputError("encoded.csv does not match constraints.txt")
    elog, _ = load_input(config)
    elog = elog.subset(split['case'])
    labels = LabelFunction(dict(zip(split['case'], split['label'])))
    train = elog.subset(split.loc[(split['part'] == 'train')
                                  & (split['used'] == 1), 'case'])
    test = elog.subset(split.loc[split['part'] == 'test', 'case'])
    X = frame.set_index('case').loc[elog.case_ids].to_numpy(dtype=np.uint8)
    return Encoded(elog, labels, train, test, space, X)


@dataclass
class Trained:
    settings: List[EnsembleParams]
    selected: List[int]
    ensembles: List[Ensemble]
    rules: List[Rule]
    lam: float
    model: RegressionModel
    cv_scores: pd.DataFrame
    ml_accuracy: float

    def selection(self) -> dict:
        best = self.cv_scores['accuracy'].max()
        return {'settings': [self.settings[i].describe() for i in self.selected],
                'lambda': self.lam,
                'cv_accuracy': float(best),
                'pooled': len(self.selected) > 1}


def _cross_validate(config: PipelineConfig, X, y,
                    settings: List[EnsembleParams]) -> pd.DataFrame:
    """Mean validation accuracy of every (ensemble setting, lambda) pair
    over the same stratified folds."""
    folds = cv_folds(y, config.cv_folds, derive_seed(config.seed, 'cv'))
    scores = {}
    for tr, va in folds:
        for i, params in enumerate(settings):
            ens = train_ensemble(X[tr], y[tr], params)
            rules = extract_rules(ens, X[tr])
            R_tr, R_va = rule_matrix(X[tr], rules), rule_matrix(X[va], rules)
            path = regularization_path(R_tr, y[tr], config.lambda_grid,
                                       kkt_tolerance=CV_KKT_TOLERANCE)
            for lam, model in path.items():
                scores.setdefault((i, lam), []).append(
                    accuracy(model, R_va, y[va]))
    rows = [[i, settings[i].describe(), lam, float(np.mean(v))]
            for (i, lam), v in sorted(scores.items())]
    return pd.DataFrame(rows, columns=['setting', 'ensemble', 'lambda',
                                       'accuracy'])


def _best(scores: pd.DataFrame) -> Tuple[int, float]:
    """Highest accuracy; ties go to the larger lambda, then the earlier
    setting."""
    top = scores["accuracy"].max()
    ties = scores[scores["accuracy"] >= top - 1e-12]
    row = ties.sort_values(["lambda", "setting"], ascending=[False, True],
                           kind="mergesort").iloc[0]
    return int(row["setting"]), float(row["lambda"])


def train_stage(config: PipelineConfig, enc: Encoded) -> Trained:
    with _stage('train'):
        settings = config.ensemble_params()
        X_train, y_train = enc.matrix(enc.train), enc.y(enc.train)
        scores = _cross_validate(config, X_train, y_train, settings)
        best, lam = _best(scores)
        selected = [best]
        if config.pool_rules:
            selected = []
            for kind in (RANDOM_FOREST, GRADIENT_BOOSTING):
                sub = scores[[settings[i].kind == kind for i in scores['setting']]]
                if len(sub):
                    selected.append(_best(sub)[0])
        ensembles, rules, seen = [], [], set()
        offset = 0
        for i in selected:
            ens = train_ensemble(X_train, y_train, settings[i])
            ensembles.append(ens)
            for r in extract_rules(ens, X_train, tree_offset=offset):
                if r.literals not in seen:
                    seen.add(r.literals)
                    rules.append(r)
            offset += len(ens.trees)
        model = fit(rule_matrix(X_train, rules), y_train, lam)
        ml_acc = accuracy(model, rule_matrix(enc.matrix(enc.test), rules),
                          enc.y(enc.test))
        trained = Trained(settings, selected, ensembles, rules, lam, model,
                          scores, ml_acc)

        for k, ens in enumerate(ensembles):
            ens.save(config.path('encoded', f"ensemble_{k}.json"))
        save_rules(rules, config.path('encoded', 'rules.json'))
        model.save(config.path('encoded', 'regression.json'))
        scores.to_csv(config.path('encoded', 'cv_scores.csv'), index=False,
                      lineterminator="\n")
        write_yaml(round_floats({'selected': selected, 'ml_accuracy': ml_acc,
                                 **trained.selection()}),
                   config.path('encoded', 'selection.yaml'))
        log.info(f"selected {trained.selection()['settings']} with lambda "
                 f"{lam}: {len(rules)} rules, {len(model.nonzero)} important, "
                 f"test accuracy {ml_acc:.4f}")
    return trained


def load_trained(config: PipelineConfig, enc: Encoded) -> Trained:
    try:
        sel = load_yaml(config.path('encoded', 'selection.yaml'))
        scores = pd.read_csv(config.path('encoded', 'cv_scores.csv'))
        selected, ml_accuracy = sel['selected'], sel['ml_accuracy']
    except (ConfigurationError, OSError, pd.errors.ParserError,
            pd.errors.EmptyDataError) as e:
        raise InputError(f"run the train stage first: {e}")
    except KeyError as e:
        raise InputError(f"selection.yaml lacks {e}; rerun the train stage")
    ensembles = [Ensemble.load(config.path('encoded', f"ensemble_{k}.json"))
                 for k in range(len(selected))]
    rules = load_rules(config.path('encoded', 'rules.json'))
    model = RegressionModel.load(config.path('encoded', 'regression.json'))
    return Trained(config.ensemble_params(), selected, ensembles, rules,
                   model.lam, model, scores, ml_accuracy)


@dataclass
class Clustered:
    """Important rules numbered by descending |coefficient|; all lists below
    are indexed by rule number."""
    numbering: List[int]
    dm: np.ndarray
    dendrogram: Dendrogram
    clusters: List[List[int]]
    representatives: List[int]
    coefficients: List[float]
    support_pos: List[float]
    support_neg: List[float]

    @property
    def K(self) -> int:
        return len(self.clusters)

    def rule_of(self, number: int) -> int:
        return self.numbering[number]

    def cluster_of(self, number: int) -> int:
        for k, c in enumerate(self.clusters):
            if number in c:
                return k + 1
        raise KeyError(number)


def _numbering(model: RegressionModel) -> List[int]:
    nz = model.nonzero
    order = np.argsort(-np.abs(model.weights[nz]), kind='stable')
    return [int(nz[k]) for k in order]


def cluster_stage(config: PipelineConfig, enc: Encoded,
                  trained: Trained) -> Clustered:
    with _stage('cluster'):
        numbering = _numbering(trained.model)
        n = len(numbering)
        if n == 0:
            log.warning("the regression kept no rules; nothing to cluster")
            clustered = Clustered([], np.zeros((0, 0)), Dendrogram(0), [], [],
                                  [], [], [])
        else:
            important = [trained.rules[r] for r in numbering]
            dm = jaccard_matrix(rule_matrix(enc.matrix(enc.train), important))
            dendrogram = agglomerate(dm)
            K = config.K
            if K > n:
                log.warning(f"K = {K} exceeds the {n} important rules; "
                            f"using K = {n}")
                K = n
            clusters = cut(dendrogram, K)
            report = select_representatives(
                [[numbering[k] for k in c] for c in clusters], trained.model,
                rule_matrix(enc.X, trained.rules), enc.labels.array(enc.elog))
            number = {r: k for k, r in enumerate(numbering)}
            clustered = Clustered(
                numbering, dm, dendrogram, clusters,
                [number[r] for r in report.representatives],
                [float(trained.model.weights[r]) for r in numbering],
                [report.support_pos[r] for r in numbering],
                [report.support_neg[r] for r in numbering])
        write_yaml(round_floats(_clusters_record(clustered, trained, enc)),
                   config.path('clusters.yaml'))
        ensure_dir(config.path('figures'))
        labels = [f"rule {k}" for k in range(n)]
        emit_figures(config.path('figures'), clustered.dm, clustered.dendrogram,
                     labels, clustered.support_pos, clustered.support_neg,
                     clustered.coefficients)
    return clustered


def _clusters_record(c: Clustered, trained: Trained, enc: Encoded) -> dict:
    return {
        'rules': [{'number': k, 'index': r,
                   'rule': trained.rules[r].describe(enc.space),
                   'coef': c.coefficients[k],
                   'support_pos': c.support_pos[k],
                   'support_neg': c.support_neg[k]}
                  for k, r in enumerate(c.numbering)],
        'merges': [{'a': s.a, 'b': s.b, 'distance': s.distance, 'size': s.size}
                   for s in c.dendrogram.steps],
        'clusters': [{'rules': members, 'representative': rep}
                     for members, rep in zip(c.clusters, c.representatives)],
    }


def load_clustered(config: PipelineConfig, enc: Encoded,
                   trained: Trained) -> Clustered:
    try:
        d = load_yaml(config.path('clusters.yaml'))
    except ConfigurationError as e:
        raise InputError(f"run the cluster stage first: {e}")
    numbering = [r['index'] for r in d['rules']]
    important = [trained.rules[r] for r in numbering]
    dm = jaccard_matrix(rule_matrix(enc.matrix(enc.train), important)) \
        if numbering else np.zeros((0, 0))
    steps = [MergeStep(s['a'], s['b'], s['distance'], s['size'])
             for s in d['merges']]
    return Clustered(numbering, dm, Dendrogram(len(numbering), steps),
                     [c['rules'] for c in d['clusters']],
                     [c['representative'] for c in d['clusters']],
                     [r['coef'] for r in d['rules']],
                     [r['support_pos'] for r in d['rules']],
                     [r['support_neg'] for r in d['rules']])


@dataclass
class Discovered:
    """Trace groups (cluster_1 .. cluster_K, desirable, undesirable) with
    their logs and one net (or None) per miner."""
    groups: Dict[str, EventLog]
    nets: Dict[Tuple[str, str], Optional[PetriNet]]
    miners: List[str]
    paths: Dict[Tuple[str, str], str]


def _groups(enc: Encoded, trained: Trained,
            clustered: Clustered) -> Dict[str, EventLog]:
    groups = {}
    for k, rep in enumerate(clustered.representatives):
        rule = trained.rules[clustered.rule_of(rep)]
        sub, _ = filter_log(enc.elog, enc.labels, rule, enc.space, enc.X)
        groups[f"cluster_{k + 1}"] = sub
    groups[DESIRABLE] = enc.labels.positive(enc.elog)
    groups[UNDESIRABLE] = enc.labels.negative(enc.elog)
    return groups


def _model_path(config: PipelineConfig, k: int, miner: str, group: str) -> str:
    """models/<group>.pnml for the first miner, models/<miner>/<group>.pnml
    for the others."""
    if k == 0:
        return config.path('models', f"{group}.pnml")
    return config.path('models', miner, f"{group}.pnml")


def discover_stage(config: PipelineConfig, enc: Encoded, trained: Trained,
                   clustered: Clustered) -> Discovered:
    with _stage('discover'):
        miners = config.make_miners()
        groups = _groups(enc, trained, clustered)
        nets, paths = {}, {}
        for k, miner in enumerate(miners):
            ensure_dir(os.path.dirname(_model_path(config, k, miner.name, 'x')))
            for group, sub in groups.items():
                net = None
                if len(sub) == 0:
                    log.warning(f"{group}: no traces satisfy the "
                                f"representative rule; no model")
                else:
                    net = miner.discover_net(sub, group)
                nets[(group, miner.name)] = net
                if net is not None:
                    path = _model_path(config, k, miner.name, group)
                    write_pnml(net, path)
                    if k == 0:
                        write_dot(net, path[:-len('.pnml')] + '.dot')
                    paths[(group, miner.name)] = path
        log.info(f"discovered {len(paths)} models for {len(groups)} trace "
                 f"groups")
    return Discovered(groups, nets, [m.name for m in miners], paths)


def load_discovered(config: PipelineConfig, enc: Encoded, trained: Trained,
                    clustered: Clustered) -> Discovered:
    miners = config.make_miners()
    groups = _groups(enc, trained, clustered)
    nets, paths = {}, {}
    for k, miner in enumerate(miners):
        for group in groups:
            path = _model_path(config, k, miner.name, group)
            net = read_pnml(path) if os.path.isfile(path) else None
            nets[(group, miner.name)] = net
            if net is not None:
                paths[(group, miner.name)] = path
    return Discovered(groups, nets, [m.name for m in miners], paths)


@dataclass
class RunReport:
    """Outcome of a run: classifier accuracy, the weighted rules, one entry
    per cluster and one metrics row per (trace group, miner)."""
    description: str
    config: dict
    ml_accuracy: float
    selection: dict
    rules: pd.DataFrame
    clusters: list
    metrics: pd.DataFrame
    artifacts: dict
    degenerate: bool = False

    def to_dict(self) -> dict:
        metrics = self.metrics.astype(object).where(self.metrics.notna(), None)
        return round_floats({
            'description': self.description,
            'degenerate': self.degenerate,
            'ml_accuracy': self.ml_accuracy,
            'selection': self.selection,
            'clusters': self.clusters,
            'rules': self.rules.to_dict(orient='records'),
            'metrics': metrics.to_dict(orient='records'),
            'artifacts': self.artifacts,
            'config': self.config,
        })

    def check(self):
        """:raises DegenerateResultError: when no rule was kept"""
        if self.degenerate:
            raise DegenerateResultError("no important rules were found; only "
                                        "the baseline models were evaluated")

    def write(self, directory: str) -> Dict[str, str]:
        paths = {'report': os.path.join(directory, 'report.yaml'),
                 'metrics': os.path.join(directory, 'report_metrics.csv'),
                 'rules': os.path.join(directory, 'report_rules.csv')}
        write_yaml(self.to_dict(), paths['report'])
        self.metrics.to_csv(paths['metrics'], index=False, lineterminator="\n",
                            float_format="%.6f")
        self.rules.to_csv(paths['rules'], index=False, lineterminator="\n",
                          float_format="%.6f")
        log.info(f"wrote report to {paths['report']}")
        return paths


def _relative(config: PipelineConfig, path: str) -> str:
    return os.path.relpath(path, config.output).replace(os.sep, '/')


def evaluate_stage(config: PipelineConfig, enc: Encoded, trained: Trained,
                   clustered: Clustered, discovered: Discovered) -> RunReport:
    with _stage('evaluate'):
        target = enc.test if config.evaluation_log == 'test' else enc.elog
        pos = enc.labels.positive(target)
        neg = enc.labels.negative(target)
        records = []
        for group, sub in discovered.groups.items():
            for miner in discovered.miners:
                net = discovered.nets[(group, miner)]
                if net is None:
                    dfm.record(records, group, miner, "no model", len(sub))
                    continue
                metrics = discriminative_metrics(pos, neg, net, config.state_cap)
                model = _relative(config, discovered.paths[(group, miner)])
                dfm.record(records, group, miner, model, len(sub), metrics)
        metrics = dfm.data_frame(records)

        rule_rows = []
        for k, r in enumerate(clustered.numbering):
            rule_rows.append([k, trained.rules[r].describe(enc.space),
                              clustered.coefficients[k],
                              clustered.cluster_of(k),
                              int(k in clustered.representatives),
                              clustered.support_pos[k],
                              clustered.support_neg[k]])
        rules = dfm.rule_frame(rule_rows)

        clusters = []
        first = discovered.miners[0]
        for k, (members, rep) in enumerate(zip(clustered.clusters,
                                               clustered.representatives)):
            group = f"cluster_{k + 1}"
            path = discovered.paths.get((group, first))
            clusters.append({
                'cluster': k + 1,
                'rules': list(members),
                'representative': rep,
                'rule': trained.rules[clustered.rule_of(rep)].describe(enc.space),
                'coef': clustered.coefficients[rep],
                'support_pos': clustered.support_pos[rep],
                'support_neg': clustered.support_neg[rep],
                'traces': len(discovered.groups[group]),
                'model': _relative(config, path) if path else None})

        ensure_dir(config.path('figures'))
        save_figure(metrics_figure(metrics), config.path('figures', 'metrics.svg'))
        n_pos, n_neg = enc.labels.counts(enc.elog)
        description = generate_description({
            'log': config.dataset or os.path.basename(str(config.log)),
            'n_traces': len(enc.elog), 'n_pos': n_pos, 'n_neg': n_neg,
            'split': f"{config.split_ratio:g}/{1 - config.split_ratio:g}",
            'seed': config.seed,
            'ensemble': ", ".join(trained.selection()['settings']),
            'lambda': f"{trained.lam:g}",
            'n_important': len(clustered.numbering), 'K': clustered.K,
            'evaluation': config.evaluation_log})
        artifacts = {
            'constraints': 'encoded/constraints.txt',
            'split': 'encoded/split.csv',
            'encoded': 'encoded/encoded.csv',
            'rules': 'encoded/rules.json',
            'regression': 'encoded/regression.json',
            'clusters': 'clusters.yaml',
            'models': sorted(_relative(config, p)
                             for p in discovered.paths.values()),
            'figures': ['figures/heatmap.svg', 'figures/dendrogram.svg',
                        'figures/metrics.svg']}
        recorded = {k: v for k, v in config.to_dict().items() if k != 'output'}
        report = RunReport(description, recorded, trained.ml_accuracy,
                           trained.selection(), rules, clusters, metrics,
                           artifacts, degenerate=not clustered.numbering)
        report.write(config.output)
    return report


def run(config: PipelineConfig, until: str = 'evaluate') -> Optional[RunReport]:
    """Runs the stages up to and including `until` in memory, writing each
    stage's artifacts; returns the report when the evaluate stage ran."""
    if until not in STAGES:
        raise ConfigurationError(f"unknown stage '{until}'")
    ensure_dir(config.output)
    config.save(config.path('config.yaml'))
    stop = STAGES.index(until)
    enc = encode_stage(config)
    if stop < 1:
        return None
    trained = train_stage(config, enc)
    if stop < 2:
        return None
    clustered = cluster_stage(config, enc, trained)
    if stop < 3:
        return None
    discovered = discover_stage(config, enc, trained, clustered)
    if stop < 4:
        return None
    report = evaluate_stage(config, enc, trained, clustered, discovered)
    if report.degenerate:
        log.warning("no important rules; the report only holds the baselines")
    return report


def run_stage(config: PipelineConfig, stage: str) -> Optional[RunReport]:
    """Runs one stage from the artifacts the earlier stages left in the
    output directory."""
    if stage not in STAGES:
        raise ConfigurationError(f"unknown stage '{stage}'")
    ensure_dir(config.output)
    if stage == 'encode':
        encode_stage(config)
        return None
    enc = load_encoded(config)
    if stage == 'train':
        train_stage(config, enc)
        return None
    trained = load_trained(config, enc)
    if stage == 'cluster':
        cluster_stage(config, enc, trained)
        return None
    clustered = load_clustered(config, enc, trained)
    if stage == 'discover':
        discover_stage(config, enc, trained, clustered)
        return None
    discovered = load_discovered(config, enc, trained, clustered)
    return evaluate_stage(config, enc, trained, clustered, discovered)
