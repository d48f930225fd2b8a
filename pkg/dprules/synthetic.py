# synthetic.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
Labelled event logs generated in code: the small loan-application example
over the activities p, a and l, and a larger seed-deterministic
application-handling log labelled by case duration.
"""

from typing import Tuple

import numpy as np
import pandas as pd

from .eventlog import EventLog, LabelFunction, Trace, label_by_duration
from .util import log

# variant: (desirable count, undesirable count)
EXAMPLE_VARIANTS = (
    (("p", "a", "l"), 100, 0),
    (("p", "l", "a"), 100, 0),
    (("a", "p", "l"), 50, 50),
    (("a", "l", "p"), 50, 50),
    (("l", "a", "p"), 0, 100),
    (("l", "p", "a"), 0, 100),
)

EXAMPLE_THRESHOLD = "5 days"
SYNTHETIC_THRESHOLD = "8 days"
SYNTHETIC_ACTIVITIES = ("register", "check_documents", "check_credit",
                        "assess", "verify", "request_info", "receive_info",
                        "escalate", "approve", "reject", "notify", "archive")


_START = pd.Timestamp("2024-01-01", tz="UTC")


def _stamps(start: pd.Timestamp, gaps) -> Tuple[pd.Timestamp, ...]:
    out = [start]
    for g in gaps:
        out.append(out[-1] + pd.Timedelta(days=float(g)))
    return tuple(out)


def example_log() -> Tuple[EventLog, LabelFunction]:
    """The 600 traces of the example: each variant with its desirable and
    undesirable frequency. Desirable cases last one day and undesirable
    ones ten, so labelling by a 5 day threshold gives the same labels.

    :return: (EventLog, LabelFunction)
    """
    traces = []
    labels = {}
    k = 0
    for variant, n_pos, n_neg in EXAMPLE_VARIANTS:
        for label, n in ((1, n_pos), (0, n_neg)):
            days = 1.0 if label == 1 else 10.0
            gap = days / (len(variant) - 1)
            for _ in range(n):
                case = f"case_{k:03d}"
                start = _START + pd.Timedelta(hours=k)
                traces.append(Trace(case, variant,
                                    _stamps(start, [gap] * (len(variant) - 1))))
                labels[case] = label
                k += 1
    return EventLog(traces), LabelFunction(labels)


def _application(rng: np.random.Generator):
    """Activities and day gaps of one generated case."""
    acts = ["register"]
    gaps = []

    def step(activity, scale):
        acts.append(activity)
        gaps.append(rng.exponential(scale))

    step("check_documents" if rng.random() < 0.6 else "check_credit", 0.5)
    first, second = ("assess", "verify") if rng.random() < 0.5 \
        else ("verify", "assess")
    step(first, 0.5)
    step(second, 0.3)
    rework = 0
    while rng.random() < 0.35 / (1 + rework):
        step("request_info", 0.3)
        step("receive_info", 2.5)
        step("assess", 0.5)
        rework += 1
    if rework >= 1 and rng.random() < 0.4:
        step("escalate", 2.0)
    approve = rng.random() < (0.75 if rework == 0 else 0.45)
    step("approve" if approve else "reject", 0.8)
    if approve or rng.random() < 0.7:
        step("notify", 0.4)
    step("archive", 1.0)
    return tuple(acts), gaps


def synthetic_log(n_traces=2000, seed=0) -> Tuple[EventLog, LabelFunction]:
    """A generated application-handling log over 12 activities. Cases are
    desirable when they finish within 8 days.

    :param n_traces: int, number of cases
    :param seed: int, the generator seed; equal seeds give equal logs
    :return: (EventLog, LabelFunction)
    """
    rng = np.random.default_rng(seed)
    traces = []
    for k in range(n_traces):
        acts, gaps = _application(rng)
        start = _START + pd.Timedelta(hours=k)
        traces.append(Trace(f"app_{k:05d}", acts, _stamps(start, gaps)))
    elog = EventLog(traces)
    labels = label_by_duration(elog, SYNTHETIC_THRESHOLD, 'below')
    log.info(f"generated {len(elog)} cases, {len(elog.variants())} variants")
    return elog, labels


def write_csv(elog: EventLog, labels: LabelFunction, log_path: str,
              label_path: str = None):
    """Writes the events (case, activity, timestamp) and optionally the
    labels (case, label) as CSV."""
    frame = elog.to_frame()
    frame['timestamp'] = [None if ts is None else ts.isoformat()
                          for ts in frame['timestamp']]
    frame.to_csv(log_path, index=False, lineterminator="\n")
    if label_path is not None:
        labels.to_frame(elog).to_csv(label_path, index=False,
                                     lineterminator="\n")
