import logging
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("default")

from hydrocal import D8Raster, build_drainage_plan, delineate_catchment  # noqa: E402
from hydrocal.synth import TWIN_D8, TWIN_OUTLET  # noqa: E402


@pytest.fixture(autouse=True)
def _quiet_logs():
    logging.getLogger("hydrocal").setLevel(logging.ERROR)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def twin():
    plan = build_drainage_plan(D8Raster(np.array(TWIN_D8)))
    return plan, delineate_catchment(plan, TWIN_OUTLET, "outlet")


@pytest.fixture(scope="session")
def single():
    plan = build_drainage_plan(D8Raster(np.array([[5]])))
    return plan, delineate_catchment(plan, (0, 0), "cell")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
