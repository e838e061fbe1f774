import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))  # make oracles.py importable


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running invariant checks")
    config.addinivalue_line("markers", "acceptance: acceptance-criteria suite")
