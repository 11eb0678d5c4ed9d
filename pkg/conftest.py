import time

import numpy as np
import pytest

from config import Config
from qanm.digraph import Digraph, generate_strongly_connected, ring
from qanm.objective import QuadraticObjective, build_scenario_objectives, sample_initial_states
from utils.logger import SimLogger


@pytest.fixture(scope="session", autouse=True)
def setup_logging():
    """Set up logging for the test session"""
    # Clear previous log file at the start of the session
    SimLogger.clear_log_file()

    logger = SimLogger.get_run_logger()
    logger.info("=" * 80)
    logger.info("🚀 Starting Test Session")
    logger.info("=" * 80)
    logger.info(f"seed={Config.SEED} round_budget={Config.ROUND_BUDGET} log_level={Config.LOG_LEVEL}")

    yield

    logger.info("=" * 80)
    logger.info("✅ Test Session Completed")
    logger.info("=" * 80)


@pytest.fixture(autouse=True)
def log_test_execution(request):
    """Log test execution details"""
    test_name = request.node.name
    test_class = request.node.cls.__name__ if request.node.cls else "standalone"

    SimLogger.log_start(
        test_name,
        test_class=test_class,
        test_file=request.node.fspath.basename
    )

    start_time = time.time()

    yield

    duration = time.time() - start_time

    if hasattr(request.node, 'rep_call'):
        if request.node.rep_call.passed:
            status = "PASSED"
        elif request.node.rep_call.failed:
            status = "FAILED"
        elif request.node.rep_call.skipped:
            status = "SKIPPED"
        else:
            status = "ERROR"
    else:
        status = "ERROR"

    SimLogger.log_end(test_name, status, duration)


@pytest.hookimpl(tryfirst=True, hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Hook to capture test results for logging"""
    outcome = yield
    rep = outcome.get_result()
    setattr(item, f"rep_{rep.when}", rep)


@pytest.fixture
def two_cycle():
    """0 <-> 1"""
    return Digraph.from_edges(2, [(0, 1), (1, 0)])


@pytest.fixture
def ring5():
    return ring(5)


@pytest.fixture
def random_graph():
    return generate_strongly_connected(8, 0.2, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture
def shared_objectives():
    return build_scenario_objectives('shared', 6, seed=3, p=5)


@pytest.fixture
def personalized_objectives():
    return build_scenario_objectives('personalized', 6, seed=3, p=5)


@pytest.fixture
def identity_objective():
    """f(x) = ½‖x - (1, 2, 3)‖², κ = 1 and β = 0"""
    return QuadraticObjective(1.0, np.eye(3), np.array([1.0, 2.0, 3.0]))


@pytest.fixture
def initial_states():
    return sample_initial_states(6, 5, seed=3)


@pytest.fixture
def results_dir(tmp_path):
    """Temporary results directory for CSV and trace output"""
    path = tmp_path / "results"
    path.mkdir()
    return path


def pytest_collection_modifyitems(config, items):
    """Modify test collection"""
    for item in items:
        if "smoke" in item.name.lower():
            item.add_marker(pytest.mark.smoke)
        if item.fspath.basename == "test_scenarios.py":
            item.add_marker(pytest.mark.slow)
