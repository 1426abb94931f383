import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def pytest_addoption(parser):
    parser.addoption("--skip-acceptance", action="store_true", help="skip the full-scale acceptance criteria")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--skip-acceptance"):
        skip = pytest.mark.skip(reason="--skip-acceptance")
        for item in items:
            if "acceptance" in item.keywords:
                item.add_marker(skip)
