"""
Unit tests for relgan/utils and the declared dependency floors
"""

import re
import unittest as ut

import pytest

from relgan.utils import fs
from relgan.utils.hashing import get_md5_hash
from relgan.utils.safe_run import SafeRun
from tests.conftest import TEST_DIR_PATH


class test_SafeRun(ut.TestCase):
    def test_success(self):
        with SafeRun(name="ok", raise_error=False) as guard:
            pass
        self.assertFalse(guard.failed)

    def test_error_is_swallowed(self):
        with SafeRun(name="plot", raise_error=False) as guard:
            raise RuntimeError("no display")
        self.assertTrue(guard.failed)

    def test_error_is_raised(self):
        with self.assertRaises(RuntimeError):
            with SafeRun(name="plot", raise_error=True):
                raise RuntimeError("no display")


def test_fs_round_trip(tmp_path):
    path = fs.join(tmp_path, "nested", "dir", "file.json")
    assert not fs.exists(path)
    fs.write_text(path, "{}")
    assert fs.read_text(path) == "{}"
    assert fs.get_basename(path) == "file.json"
    assert fs.get_basename(fs.join(tmp_path, "nested") + "/") == "nested"


def test_fs_directories(tmp_path):
    root = fs.join(tmp_path, "images")
    assert not fs.exists_and_not_empty(root)
    fs.mkdir(root)
    assert not fs.exists_and_not_empty(root)
    for name in ("b.PNG", "a.png", "notes.txt"):
        fs.write_bytes(fs.join(root, name), b"x")
    fs.mkdir(fs.join(root, "sub.png"))
    assert [fs.get_basename(f) for f in fs.list_files(root, ".png")] == ["a.png", "b.PNG"]
    assert fs.exists_and_not_empty(root)
    fs.rm(root, recursive=True)
    assert not fs.exists(root)


def test_md5_hash_is_order_independent():
    assert get_md5_hash({"a": 1, "b": [1, 2]}) == get_md5_hash({"b": [1, 2], "a": 1})
    assert get_md5_hash({"a": 1}) != get_md5_hash({"a": 2})


def _floor(text, pattern):
    match = re.search(pattern, text)
    assert match is not None, pattern
    return tuple(int(v) for v in match.group(1).split("."))


def test_declared_floors_cover_the_apis_in_use():
    # importlib.resources.files needs python 3.9, matplotlib.colormaps needs matplotlib 3.5
    manifest = TEST_DIR_PATH.parent / "pyproject.toml"
    if not manifest.exists():
        pytest.skip("not running from a source checkout")
    text = manifest.read_text()
    assert _floor(text, r'requires-python = ">=([0-9.]+)"') >= (3, 9)
    assert _floor(text, r'"matplotlib >=([0-9.]+)"') >= (3, 5)

    env = (TEST_DIR_PATH.parent / "env.yml").read_text()
    assert _floor(env, r"- python >=([0-9.]+)") >= (3, 9)
    assert _floor(env, r"- matplotlib >=([0-9.]+)") >= (3, 5)


if __name__ == "__main__":
    ut.main()
