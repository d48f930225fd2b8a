# df.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
Functions to support generating the metrics and rule tables of a run report
from lists of records
"""

import pandas

METRIC_COLUMNS = ["Group",
                  "Miner",
                  "Model",
                  "Traces",
                  "t-fit L+",
                  "t-fit L-",
                  "a-fit L+",
                  "a-fit L-",
                  "prc",
                  "a-acc",
                  "t-acc",
                  "a-F1",
                  "t-F1"]


RULE_COLUMNS = ["Rule No",
                "Rule",
                "Coef",
                "Cluster",
                "Representative",
                "Support L+",
                "Support L-"]


def data_frame(records: list) -> pandas.DataFrame:
    """Convert the given list of metric rows into a data frame."""
    return pandas.DataFrame(records, columns=METRIC_COLUMNS)


def rule_frame(records: list) -> pandas.DataFrame:
    """Convert the given list of rule rows into a data frame."""
    return pandas.DataFrame(records, columns=RULE_COLUMNS)


def record(records: list,
           group="",
           miner="",
           model="",
           traces=0,
           metrics=None) -> list:
    """Append a new metrics row to the given list (which may be the empty
    list). Without `metrics` (a MetricsReport) the metric cells stay empty,
    which marks a group without a model.
    """
    values = [None] * 9
    if metrics is not None:
        values = [metrics.t_fit_pos,
                  metrics.t_fit_neg,
                  metrics.a_fit_pos,
                  metrics.a_fit_neg,
                  metrics.prc,
                  metrics.a_acc,
                  metrics.t_acc,
                  metrics.a_f1,
                  metrics.t_f1]
    records.append([group, miner, model, traces] + values)
    return records

