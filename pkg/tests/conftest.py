import pytest
from hypothesis import settings

settings.register_profile("fast", max_examples=10, deadline=None)
settings.register_profile("thorough", max_examples=500, deadline=None)

_TIERS = {"slow": "--runslow", "full": "--runfull"}


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run the reduced reproduction runs")
    parser.addoption("--runfull", action="store_true", default=False,
                     help="run the full-length reproductions of the shipped experiment configs")


def pytest_collection_modifyitems(config, items):
    for marker, option in _TIERS.items():
        if config.getoption(option):
            continue
        skip = pytest.mark.skip(reason=f"needs {option}")
        for item in items:
            if marker in item.keywords:
                item.add_marker(skip)
