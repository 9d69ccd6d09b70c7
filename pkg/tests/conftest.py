import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def data_dir() -> Path:
    return Path(os.environ.get("IMGRAPH_DATA_DIR", Path(__file__).resolve().parents[1] / "data"))


@pytest.fixture(scope="session")
def mnist_dir():
    d = data_dir() / "mnist"
    if not (d / "train-images-idx3-ubyte").exists():
        pytest.skip(f"MNIST files not found under {d}")
    return d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Record one verdict line per acceptance criterion."""
    def record(number, passed, detail):
        line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} ({detail})"
        _ACCEPTANCE[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
