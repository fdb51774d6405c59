from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixtures import (  # noqa: E402
    write_gtfs_like,
    write_four_group_example,
    write_running_example,
)

from kgplan.rml_model import load_mapping_files  # noqa: E402


@pytest.fixture()
def running_example(tmp_path):
    mapping = write_running_example(tmp_path / "running")
    return load_mapping_files([mapping])


@pytest.fixture()
def running_example_dir(tmp_path):
    return write_running_example(tmp_path / "running")


@pytest.fixture()
def four_group_example(tmp_path):
    mapping = write_four_group_example(tmp_path / "suite")
    return load_mapping_files([mapping])


@pytest.fixture()
def four_group_example_dir(tmp_path):
    return write_four_group_example(tmp_path / "suite")


@pytest.fixture()
def gtfs_like(tmp_path):
    mapping = write_gtfs_like(tmp_path / "gtfs")
    return load_mapping_files([mapping])
