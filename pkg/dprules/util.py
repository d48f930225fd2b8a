# util.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
This module contains common functions and the exception types shared by the
stages of the rule-learning pipeline
"""

import os
import sys
import uuid
import zlib
import logging as log

import numpy as np
import yaml

# set version number of package, needs to be updated with setup.py
pkg_version_number = '0.1.0'
modulepath = os.path.dirname(os.path.realpath(__file__)).replace('\\', '/')
datapath = modulepath + '/data/'

log.basicConfig(level=log.INFO, format='%(asctime)s %(levelname)-8s %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S', stream=sys.stdout)


class DprulesError(Exception):
    """Base class of all errors raised by dprules."""


class InputError(DprulesError):
    """Input data (logs, labels, models) could not be read or is invalid."""


class ConfigurationError(DprulesError):
    """A configuration value or a column mapping is invalid."""


class StateSpaceError(DprulesError):
    """A search or enumeration exceeded its state cap."""

    def __init__(self, message: str, cap: int):
        super().__init__(f"{message} (cap {cap})")
        self.cap = cap


class StageError(DprulesError):
    """A pipeline stage failed; keeps the stage name and the cause."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class DegenerateResultError(DprulesError):
    """The pipeline finished a stage but produced nothing usable."""


def derive_seed(seed: int, *stage: str) -> int:
    """Derives a reproducible sub-seed for a named stage from the run seed.

    :param seed: int, the run seed
    :param stage: str, one or more stage names, e.g. ('train', 'forest')
    :return: int, a 32 bit seed
    """
    keys = [zlib.crc32(s.encode("utf-8")) for s in stage]
    ss = np.random.SeedSequence([int(seed)] + keys)
    return int(ss.generate_state(1)[0])


def make_uuid(*args: str) -> str:
    path = _as_path(*args)
    return str(uuid.uuid3(uuid.NAMESPACE_OID, path))


def _as_path(*args: str) -> str:
    strings = []
    for arg in args:
        if arg is None:
            continue
        strings.append(str(arg).strip().lower())
    return "/".join(strings)


def load_yaml(path: str) -> dict:
    """Reads a yaml file into a dictionary; an empty file gives {}."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            content = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigurationError(f"configuration file {path} not found")
    except yaml.YAMLError as e:
        raise ConfigurationError(f"could not parse {path}: {e}")
    if content is None:
        return {}
    if not isinstance(content, dict):
        raise ConfigurationError(f"{path} must contain a mapping")
    return content


def write_yaml(data: dict, path: str):
    """Writes the dictionary as block-style yaml with stable key order."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        yaml.safe_dump(data, f, sort_keys=False, default_flow_style=False,
                       allow_unicode=True)


def round_floats(obj, digits=6):
    """Rounds all floats in a nested structure of dicts and lists."""
    if isinstance(obj, dict):
        return {k: round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return round(float(obj), digits)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def generate_description(values: dict) -> str:
    """Fills the [tags] of the report description template."""
    with open(datapath + "description.yaml") as f:
        desc = yaml.safe_load(f)['description']
    values = dict(values)
    values.setdefault('version', pkg_version_number)
    for k, v in values.items():
        desc = desc.replace(f"[{k}]", str(v))
    return " ".join(desc.split())


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
