import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run acceptance-scale tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def clean_env(monkeypatch):
    for name in ("REPROMC_SEED", "REPROMC_BLOCK_SIZE", "REPROMC_WORKERS", "REPROMC_OUTPUT_DIR",
                 "REPROMC_RECORDS_PATH", "REPROMC_LOG_FILE", "LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    return monkeypatch
