import pytest

from intervenidar.board import load_default_config


@pytest.fixture(scope="session")
def default_config():
    return load_default_config()
