"""
Shared pytest configuration.

Tests marked `slow` (large Monte Carlo runs, exhaustive volume rankings)
run only when LDCANON_SLOW=1.
"""

import os

import pytest

SLOW_ENV = "LDCANON_SLOW"


def pytest_configure(config):
    config.addinivalue_line("markers", f"slow: long-running statistical check (set {SLOW_ENV}=1 to run)")


def pytest_collection_modifyitems(config, items):
    if os.environ.get(SLOW_ENV) == "1":
        return
    skip_slow = pytest.mark.skip(reason=f"slow; set {SLOW_ENV}=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
