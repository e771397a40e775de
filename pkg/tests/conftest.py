from pathlib import Path

import pytest

from preshape_forge.scene import RandomizationSpec, WorkspaceConfig
from preshape_forge.taxonomy import load_taxonomy


@pytest.fixture(scope="session")
def taxonomy():
    return load_taxonomy()


@pytest.fixture(scope="session")
def workspace():
    return WorkspaceConfig()


@pytest.fixture(scope="session")
def small_workspace():
    # Lower render resolution keeps visibility checks fast in tests.
    return WorkspaceConfig(image_size=(96, 96))


@pytest.fixture(scope="session")
def randomization():
    return RandomizationSpec()


@pytest.fixture(scope="session")
def repo_root():
    return Path(__file__).resolve().parent.parent
