# __init__.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
Public API for dprules. Learns rules that discriminate desirable from
undesirable cases of an event log, groups them into clusters and discovers
one process model per cluster, evaluated against both groups of cases.
"""

import json

from enum import Enum
from typing import Tuple

import dprules.cache as cache
import dprules.synthetic as synthetic
import dprules.util as util
from dprules.eventlog import EventLog, LabelFunction, Trace, read_log, \
    read_labels, label_by_duration, filter_by_duration, split_train_test, \
    undersample
from dprules.declare import Constraint, Outcome, Template, evaluate, \
    discover_constraints
from dprules.encoding import FeatureSpace, encode, encode_log, rule_holds, \
    rule_matrix
from dprules.ensemble import EnsembleParams, Rule, train_ensemble, \
    extract_rules
from dprules.regression import RegressionModel, fit, predict, importance
from dprules.clustering import jaccard_matrix, agglomerate, cut, \
    select_representatives, filter_log
from dprules.discovery import ProcessTree, InductiveMiner, PnmlMiner, \
    discover, to_petri_net
from dprules.petrinet import PetriNet, read_pnml, write_pnml
from dprules.conformance import Alignment, MetricsReport, align, \
    alignment_fitness, trace_fitness, precision, discriminative_metrics
from dprules.pipeline import PipelineConfig, RunReport, run


class Dataset(Enum):
    """Event logs with known labelling settings."""

    BPIC12 = "BPI Challenge 2012"
    BPIC17 = "BPI Challenge 2017"
    HOSPITAL_BILLING = "Hospital Billing"
    EXAMPLE = "Loan application example"
    SYNTHETIC = "Synthetic application handling"

    def get_metadata(cls) -> dict:
        """Return the stored metadata."""
        for m in supported_datasets():
            if m['id'] == cls.name:
                return m

    @staticmethod
    def get_class(name: str):
        """Returns the dataset with the given id or name."""
        for n, c in Dataset.__members__.items():
            if n == name or c.value == name or n.lower() == str(name).lower():
                return c
        raise util.ConfigurationError(f"unknown dataset '{name}'; known: "
                                      f"{', '.join(Dataset.__members__)}")


def supported_datasets() -> list:
    """Return a list of dictionaries of supported dataset meta data."""
    json_file = util.datapath + 'datasets.json'
    with open(json_file, "r", encoding="utf-8") as f:
        return json.load(f)


def get_log(dataset_id, file=None, url=None) -> Tuple[EventLog, LabelFunction]:
    """Returns a registered log with the labels of its stored settings.

    Generated datasets are built in memory. Public logs are read from the
    given file, or from the local cache, downloading the given URL first when
    it is not cached yet.
    :param dataset_id: class Dataset or str, based on the id field of
        supported_datasets
    :param file: str, path of a local copy of the log
    :param url: str, download location when the log is not cached
    :return: (EventLog, LabelFunction)
    """
    if not isinstance(dataset_id, Dataset):
        dataset_id = Dataset.get_class(dataset_id)
    meta = dataset_id.get_metadata()
    if dataset_id == Dataset.EXAMPLE:
        return synthetic.example_log()
    if dataset_id == Dataset.SYNTHETIC:
        return synthetic.synthetic_log()
    if file is None:
        file = cache.get_or_download(meta['file'], url or meta['url'])
    if file is None:
        raise util.InputError(
            f"{meta['name']} is not cached; download it from "
            f"https://doi.org/{meta['doi']} and pass the file or a URL")
    elog = read_log(file)
    if meta.get('min_duration'):
        elog = filter_by_duration(elog, meta['min_duration'])
    labels = label_by_duration(elog, meta['label_threshold'],
                               meta['desirable_side'])
    return elog, labels


def clear_cache():
    """Delete all downloaded logs in the local cache."""
    cache.clear()
