# eventlog.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
Event logs, case labels and the sampling steps applied to them before
training: parsing from CSV and XES, duration based labelling, stratified
train/test splitting and undersampling.
"""

import gzip
from collections import Counter
from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from lxml import etree
from sklearn.model_selection import train_test_split

from .util import log, InputError, ConfigurationError

DEFAULT_COLUMNS = {'case': 'case', 'activity': 'activity',
                   'timestamp': 'timestamp'}


@dataclass(frozen=True)
class Trace:
    """One case of a log: its id and the ordered activity names."""
    case_id: str
    activities: Tuple[str, ...]
    timestamps: Optional[Tuple[pd.Timestamp, ...]] = None

    def __len__(self):
        return len(self.activities)

    @property
    def duration(self) -> Optional[pd.Timedelta]:
        if not self.timestamps:
            return None
        return self.timestamps[-1] - self.timestamps[0]


class EventLog:
    """An immutable collection of traces with pairwise distinct case ids.

    Traces keep the order in which they were given; the alphabet is the
    union of all activities.
    """

    def __init__(self, traces: Iterable[Trace]):
        self.__traces = tuple(traces)
        self.__index = {}
        for i, t in enumerate(self.__traces):
            if t.case_id in self.__index:
                raise InputError(f"duplicate case id '{t.case_id}'")
            self.__index[t.case_id] = i
        acts = set()
        for t in self.__traces:
            acts.update(t.activities)
        self.__alphabet = frozenset(acts)

    def __len__(self):
        return len(self.__traces)

    def __iter__(self) -> Iterator[Trace]:
        return iter(self.__traces)

    def __getitem__(self, i: int) -> Trace:
        return self.__traces[i]

    def __contains__(self, case_id) -> bool:
        return case_id in self.__index

    def __eq__(self, other):
        if not isinstance(other, EventLog):
            return NotImplemented
        return self.__traces == other.traces

    def __hash__(self):
        return hash(self.__traces)

    def __repr__(self):
        return f"EventLog({len(self)} traces, {len(self.__alphabet)} activities)"

    @property
    def traces(self) -> Tuple[Trace, ...]:
        return self.__traces

    @property
    def alphabet(self) -> frozenset:
        return self.__alphabet

    @property
    def case_ids(self) -> List[str]:
        return [t.case_id for t in self.__traces]

    def get(self, case_id: str) -> Trace:
        if case_id not in self.__index:
            raise KeyError(case_id)
        return self.__traces[self.__index[case_id]]

    def subset(self, case_ids: Iterable[str]) -> "EventLog":
        """Returns the sub-log of the given case ids in the order of this
        log. Unknown ids are ignored."""
        keep = set(case_ids)
        return EventLog(t for t in self.__traces if t.case_id in keep)

    def variants(self) -> Counter:
        """Counts traces per activity sequence."""
        return Counter(t.activities for t in self.__traces)

    def to_frame(self) -> pd.DataFrame:
        """One row per event with the default column names."""
        rows = []
        for t in self.__traces:
            for i, a in enumerate(t.activities):
                ts = t.timestamps[i] if t.timestamps else None
                rows.append([t.case_id, a, ts])
        return pd.DataFrame(rows, columns=list(DEFAULT_COLUMNS.values()))


class LabelFunction:
    """Immutable case id to label mapping; 1 = desirable, 0 = undesirable."""

    def __init__(self, mapping: Mapping[str, int]):
        checked = {}
        for k, v in mapping.items():
            if v not in (0, 1):
                raise InputError(f"label of case '{k}' must be 0 or 1, got {v!r}")
            checked[str(k)] = int(v)
        self.__mapping = MappingProxyType(checked)

    def __getitem__(self, case_id: str) -> int:
        return self.__mapping[case_id]

    def __len__(self):
        return len(self.__mapping)

    def __contains__(self, case_id) -> bool:
        return case_id in self.__mapping

    def __eq__(self, other):
        if not isinstance(other, LabelFunction):
            return NotImplemented
        return dict(self.__mapping) == dict(other.mapping)

    @property
    def mapping(self) -> Mapping[str, int]:
        return self.__mapping

    def check_total(self, elog: EventLog):
        missing = [c for c in elog.case_ids if c not in self.__mapping]
        if missing:
            raise InputError(f"{len(missing)} cases have no label, "
                             f"e.g. '{missing[0]}'")

    def array(self, elog: EventLog) -> np.ndarray:
        """Labels of the log's traces in log order."""
        self.check_total(elog)
        return np.array([self.__mapping[c] for c in elog.case_ids], dtype=int)

    def restrict(self, elog: EventLog) -> "LabelFunction":
        self.check_total(elog)
        return LabelFunction({c: self.__mapping[c] for c in elog.case_ids})

    def positive(self, elog: EventLog) -> EventLog:
        """The desirable sub-log."""
        self.check_total(elog)
        return EventLog(t for t in elog if self.__mapping[t.case_id] == 1)

    def negative(self, elog: EventLog) -> EventLog:
        """The undesirable sub-log."""
        self.check_total(elog)
        return EventLog(t for t in elog if self.__mapping[t.case_id] == 0)

    def counts(self, elog: EventLog) -> Tuple[int, int]:
        """(number desirable, number undesirable) over the log."""
        y = self.array(elog)
        return int(y.sum()), int(len(y) - y.sum())

    @classmethod
    def from_csv(cls, path: str) -> "LabelFunction":
        return read_labels(path)

    def to_frame(self, elog: EventLog = None) -> pd.DataFrame:
        ids = elog.case_ids if elog is not None else list(self.__mapping)
        return pd.DataFrame({'case': ids,
                             'label': [self.__mapping[c] for c in ids]})


def _parse_timestamps(values: pd.Series) -> pd.Series:
    return pd.to_datetime(values, errors='coerce', utc=True, format='ISO8601')


def parse_csv(path: str, column_map: Dict[str, str] = None) -> EventLog:
    """Reads an event log from a CSV file with one event per row.

    :param path: str, path of the CSV file (header row, UTF-8)
    :param column_map: dict with the keys 'case', 'activity' and
        'timestamp' naming the columns; the timestamp entry may be None when
        the rows are already in execution order
    :return: EventLog with one trace per distinct case id, events ordered by
        timestamp and then by input row
    """
    cols = dict(DEFAULT_COLUMNS)
    if column_map:
        cols.update(column_map)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False,
                         encoding="utf-8")
    except FileNotFoundError:
        raise InputError(f"log file {path} not found")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise InputError(f"could not read {path}: {e}")
    for key in ('case', 'activity', 'timestamp'):
        name = cols.get(key)
        if name is None and key == 'timestamp':
            continue
        if name not in df.columns:
            raise ConfigurationError(
                f"column '{name}' ({key}) not found in {path}; "
                f"available columns: {', '.join(df.columns)}")

    df['_row'] = np.arange(len(df))
    ts_col = cols.get('timestamp')
    if ts_col is not None:
        ts = _parse_timestamps(df[ts_col])
        bad = ts.isna().to_numpy().nonzero()[0]
        if len(bad) > 0:
            row = int(bad[0])
            # header is line 1
            raise InputError(f"{path}, line {row + 2}: cannot parse "
                             f"timestamp '{df[ts_col].iloc[row]}'")
        df['_ts'] = ts
        df = df.sort_values(['_ts', '_row'], kind='mergesort')

    case_order = pd.unique(df.sort_values('_row')[cols['case']])
    groups = dict(list(df.groupby(cols['case'], sort=False)))
    traces = []
    for case in case_order:
        g = groups[case]
        stamps = None
        if ts_col is not None:
            stamps = tuple(g['_ts'])
        traces.append(Trace(str(case), tuple(g[cols['activity']]), stamps))
    elog = EventLog(traces)
    log.info(f"read {len(elog)} traces over {len(elog.alphabet)} "
             f"activities from {path}")
    return elog


def _localname(el) -> str:
    return etree.QName(el).localname


def _attribute(el, key: str, tag: str = None) -> Optional[str]:
    for child in el:
        if not isinstance(child.tag, str):
            continue
        if child.get('key') == key and (tag is None or _localname(child) == tag):
            return child.get('value')
    return None


def parse_xes(path: str) -> EventLog:
    """Reads the XES subset used for labelled logs: trace and event
    `concept:name` and event `time:timestamp`. Other attributes are ignored.
    Files ending with .gz are decompressed on the fly.
    """
    try:
        if str(path).endswith('.gz'):
            with gzip.open(path, 'rb') as f:
                root = etree.parse(f).getroot()
        else:
            root = etree.parse(str(path)).getroot()
    except (OSError, etree.XMLSyntaxError) as e:
        raise InputError(f"could not parse XES file {path}: {e}")
    if _localname(root) != 'log':
        raise InputError(f"{path}: root element must be <log>")

    traces = []
    trace_els = [el for el in root if isinstance(el.tag, str)
                 and _localname(el) == 'trace']
    for ti, tel in enumerate(trace_els):
        case_id = _attribute(tel, 'concept:name')
        if case_id is None:
            raise InputError(f"{path}: trace {ti} has no concept:name")
        acts, stamps = [], []
        for ei, eel in enumerate(el for el in tel if isinstance(el.tag, str)
                                 and _localname(el) == 'event'):
            name = _attribute(eel, 'concept:name')
            if name is None:
                raise InputError(f"{path}: event {ei} of trace {ti} "
                                 f"('{case_id}') has no concept:name")
            acts.append(name)
            value = _attribute(eel, 'time:timestamp', 'date')
            if value is None:
                stamps.append(None)
                continue
            try:
                ts = pd.Timestamp(value)
            except ValueError:
                raise InputError(f"{path}: event {ei} of trace {ti} has an "
                                 f"invalid timestamp '{value}'")
            stamps.append(ts.tz_convert('UTC') if ts.tzinfo
                          else ts.tz_localize('UTC'))
        if not acts:
            log.warning(f"trace '{case_id}' in {path} has no events")
        if acts and all(s is not None for s in stamps):
            order = sorted(range(len(acts)), key=lambda i: (stamps[i], i))
            acts = [acts[i] for i in order]
            stamps = tuple(stamps[i] for i in order)
        else:
            stamps = None
        traces.append(Trace(str(case_id), tuple(acts), stamps))
    elog = EventLog(traces)
    log.info(f"read {len(elog)} traces over {len(elog.alphabet)} "
             f"activities from {path}")
    return elog


def read_log(path: str, column_map: Dict[str, str] = None) -> EventLog:
    """Parses a CSV or XES (optionally gzipped) event log by extension."""
    p = str(path).lower()
    if p.endswith('.xes') or p.endswith('.xes.gz'):
        return parse_xes(path)
    if p.endswith('.csv'):
        return parse_csv(path, column_map)
    raise InputError(f"unsupported log format: {path}")


def read_labels(path: str) -> LabelFunction:
    """Reads a 2-column CSV (case id, label in {0, 1})."""
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise InputError(f"label file {path} not found")
    if df.shape[1] != 2:
        raise InputError(f"{path} must have exactly 2 columns (case, label)")
    mapping = {}
    for i, (case, value) in enumerate(df.itertuples(index=False, name=None)):
        if value.strip() not in ('0', '1'):
            raise InputError(f"{path}, line {i + 2}: label must be 0 or 1")
        if case in mapping:
            raise InputError(f"{path}, line {i + 2}: duplicate case '{case}'")
        mapping[case] = int(value)
    return LabelFunction(mapping)


def _as_timedelta(threshold) -> pd.Timedelta:
    if isinstance(threshold, pd.Timedelta):
        return threshold
    if isinstance(threshold, (int, float)):
        return pd.Timedelta(days=threshold)
    try:
        return pd.Timedelta(threshold)
    except ValueError:
        raise ConfigurationError(f"invalid duration threshold {threshold!r}")


def label_by_duration(elog: EventLog, threshold, desirable_side='below',
                      timestamps: Mapping[str, Iterable] = None) -> LabelFunction:
    """Labels cases by their duration from first to last event.

    A case is desirable (1) iff its duration lies strictly on the desirable
    side of the threshold; a duration equal to the threshold is undesirable.
    :param elog: EventLog
    :param threshold: pd.Timedelta, a pandas duration string such as
        '28 days', or a number of days
    :param desirable_side: str, 'below' or 'above'
    :param timestamps: optional dict of case id to event times, used instead
        of the timestamps stored in the traces
    :return: LabelFunction over the log
    """
    if desirable_side not in ('below', 'above'):
        raise ConfigurationError(
            f"desirable_side must be 'below' or 'above', got {desirable_side!r}")
    limit = _as_timedelta(threshold)
    labels = {}
    for t in elog:
        if timestamps is not None:
            stamps = [pd.Timestamp(s) for s in timestamps.get(t.case_id, ())]
        else:
            stamps = list(t.timestamps or ())
        if not stamps:
            raise InputError(f"case '{t.case_id}' has no timestamps")
        duration = stamps[-1] - stamps[0]
        if desirable_side == 'below':
            labels[t.case_id] = int(duration < limit)
        else:
            labels[t.case_id] = int(duration > limit)
    result = LabelFunction(labels)
    pos, neg = result.counts(elog)
    log.info(f"labelled {pos} cases desirable and {neg} undesirable "
             f"(threshold {limit}, desirable {desirable_side})")
    return result


def filter_by_duration(elog: EventLog, minimum) -> EventLog:
    """Drops the cases shorter than `minimum` (same forms as a labelling
    threshold); cases without timestamps are kept."""
    limit = _as_timedelta(minimum)
    kept = EventLog(t for t in elog
                    if t.duration is None or t.duration >= limit)
    log.info(f"kept {len(kept)} of {len(elog)} cases lasting at least {limit}")
    return kept


def split_train_test(elog: EventLog, labels: LabelFunction, ratio=0.7,
                     seed=0) -> Tuple[EventLog, EventLog]:
    """Stratified partition of the log into a training and a test part.

    Each class needs at least 2 traces so that both parts hold both
    classes; a log of one desirable and one undesirable trace is rejected
    rather than split 1/1. Both parts get at least 2 traces.

    :param ratio: float, fraction of traces in the training part, 0 < ratio < 1
    :param seed: int
    :return: (train, test), each in the order of the input log
    """
    if not 0 < ratio < 1:
        raise ConfigurationError(f"split ratio must be in (0, 1), got {ratio}")
    y = labels.array(elog)
    for cls in (0, 1):
        if (y == cls).sum() < 2:
            raise InputError(f"class {cls} has fewer than 2 traces; "
                             f"cannot stratify the split")
    ids = elog.case_ids
    n_train = min(max(int(round(ratio * len(ids))), 2), len(ids) - 2)
    try:
        train_ids, _ = train_test_split(ids, train_size=n_train, stratify=y,
                                        random_state=seed)
    except ValueError as e:
        raise InputError(f"cannot split log: {e}")
    keep = set(train_ids)
    train = EventLog(t for t in elog if t.case_id in keep)
    test = EventLog(t for t in elog if t.case_id not in keep)
    log.info(f"split {len(elog)} traces into {len(train)} train "
             f"and {len(test)} test")
    return train, test


def undersample(elog: EventLog, labels: LabelFunction, seed=0) -> EventLog:
    """Draws the majority class down to the size of the minority class.

    Majority traces are chosen uniformly without replacement; the minority
    class is kept intact and the input order is preserved.
    """
    y = labels.array(elog)
    pos = int(y.sum())
    neg = len(y) - pos
    if pos == 0 or neg == 0:
        raise InputError("undersampling needs traces of both classes")
    if pos == neg:
        return elog
    majority = 1 if pos > neg else 0
    m = min(pos, neg)
    idx = np.flatnonzero(y == majority)
    rng = np.random.default_rng(seed)
    chosen = set(rng.choice(idx, size=m, replace=False).tolist())
    keep = [t for i, t in enumerate(elog) if y[i] != majority or i in chosen]
    log.debug(f"undersampled class {majority} from {max(pos, neg)} to {m}")
    return EventLog(keep)
