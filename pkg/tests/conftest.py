import pytest

from mapnets.config import Config


@pytest.fixture(scope="session")
def cfg() -> Config:
    return Config()


@pytest.fixture(scope="session")
def grid(cfg):
    return cfg.grid()
