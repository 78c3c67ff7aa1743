import os

import hypothesis
import pytest

from starfactor.pairing import MultiGraph


quiet = [hypothesis.HealthCheck.too_slow, hypothesis.HealthCheck.function_scoped_fixture]
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None, suppress_health_check=quiet)
hypothesis.settings.register_profile("ci", max_examples=100, deadline=None, suppress_health_check=quiet)
hypothesis.settings.register_profile("thorough", max_examples=1000, deadline=None, suppress_health_check=quiet)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run acceptance-scale tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow") or os.environ.get("STARFACTOR_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow or STARFACTOR_RUN_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def k4():
    return MultiGraph.from_edge_list(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])


@pytest.fixture
def claw():
    return MultiGraph.from_edge_list(4, [(0, 1), (0, 2), (0, 3)])


@pytest.fixture
def cube():
    # vertices are 3-bit strings, edges join strings at Hamming distance 1
    edges = [(u, u ^ (1 << bit)) for u in range(8) for bit in range(3) if u < u ^ (1 << bit)]
    return MultiGraph.from_edge_list(8, edges)


@pytest.fixture
def make_cycle():
    def build(n):
        return MultiGraph.from_edge_list(n, [(i, (i + 1) % n) for i in range(n)])
    return build


@pytest.fixture
def c8(make_cycle):
    return make_cycle(8)


@pytest.fixture
def log_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("STARFACTOR_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("STARFACTOR_PROGRESS", "0")
    return tmp_path / "logs"
