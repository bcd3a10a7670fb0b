import logging
import os
import sys

import pytest
from fastapi.testclient import TestClient
from typer.testing import CliRunner

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from cadeval.csg import extract_boundary_mesh
from cadeval.geometry import unit_cube_mesh
from cadeval.main import app
from cadeval.scad import FIXTURE_NAMES, fixture_path, load_fixture


@pytest.fixture(scope="session")
def fixture_solids():
    return {name: load_fixture(name) for name in FIXTURE_NAMES}


@pytest.fixture(scope="session")
def fixture_meshes(fixture_solids):
    return {name: extract_boundary_mesh(s) for name, s in fixture_solids.items()}


@pytest.fixture(scope="session")
def fixture_paths():
    return {name: fixture_path(name) for name in FIXTURE_NAMES}


@pytest.fixture
def cube():
    return unit_cube_mesh()


@pytest.fixture(scope="function")
def client():
    with TestClient(app, base_url="http://test") as test_client:
        yield test_client


@pytest.fixture
def runner():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield CliRunner()
    # the CLI rebinds logging to the runner's stderr, closed after each run
    root.handlers[:] = handlers
    root.setLevel(level)
