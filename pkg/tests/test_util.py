"""Tests seeds, yaml helpers, the dataset registry and the log cache"""
import unittest

import numpy as np
import pytest

import dprules
import dprules.cache as cache
from dprules.util import ConfigurationError, derive_seed, load_yaml, \
    make_uuid, round_floats, write_yaml


class SeedTest(unittest.TestCase):

    def test_derived_seeds(self):
        self.assertEqual(derive_seed(0, 'split'), derive_seed(0, 'split'))
        self.assertNotEqual(derive_seed(0, 'split'), derive_seed(1, 'split'))
        self.assertNotEqual(derive_seed(0, 'split'), derive_seed(0, 'cv'))
        self.assertNotEqual(derive_seed(0, 'ensemble', '1'),
                            derive_seed(0, 'ensemble', '2'))
        self.assertLess(derive_seed(7, 'cv'), 2 ** 32)

    def test_uuid_is_stable(self):
        self.assertEqual(make_uuid("net", "tau_1"), make_uuid("Net", " tau_1"))


def test_yaml_files(tmp_path):
    path = str(tmp_path / "c.yaml")
    write_yaml({'b': 1, 'a': [0.5]}, path)
    assert load_yaml(path) == {'b': 1, 'a': [0.5]}
    (tmp_path / "empty.yaml").write_text("")
    assert load_yaml(str(tmp_path / "empty.yaml")) == {}
    (tmp_path / "list.yaml").write_text("- 1\n")
    with pytest.raises(ConfigurationError):
        load_yaml(str(tmp_path / "list.yaml"))
    with pytest.raises(ConfigurationError):
        load_yaml(str(tmp_path / "missing.yaml"))


def test_round_floats():
    rounded = round_floats({'x': np.float64(1 / 3), 'n': np.int64(2),
                            'l': [0.1234567, "s"]})
    assert rounded == {'x': 0.333333, 'n': 2, 'l': [0.123457, "s"]}
    assert type(rounded['n']) is int


def test_dataset_registry():
    assert dprules.Dataset.get_class("example") is dprules.Dataset.EXAMPLE
    assert dprules.Dataset.EXAMPLE.get_metadata()['K'] == 2
    with pytest.raises(ConfigurationError):
        dprules.Dataset.get_class("BPIC99")
    elog, labels = dprules.get_log("EXAMPLE")
    assert labels.counts(elog) == (300, 300)


def test_cache_folder(tmp_path, monkeypatch):
    monkeypatch.setenv("DPRULES_CACHE", str(tmp_path / "cache"))
    assert cache.get_folder(create=True) == str(tmp_path / "cache")
    assert not cache.exists("log.xes.gz")
    assert cache.get_or_download("log.xes.gz") is None
    (tmp_path / "cache" / "log.xes.gz").write_bytes(b"")
    assert cache.get_or_download("log.xes.gz") == cache.get_path("log.xes.gz")
    dprules.clear_cache()
    assert not (tmp_path / "cache").exists()


if __name__ == "__main__":
    unittest.main()
