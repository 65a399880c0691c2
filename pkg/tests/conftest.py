import numpy as np
import pytest

from aedetect import synthgen as sg


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_trace():
    """600-sample, 12-channel trace with one anomaly of each kind in the tail."""
    profile = sg.NodeProfile.random("nodeA", 12, seed=3)
    schedule = sg.AnomalySchedule(((380, 440, "powersave"), (500, 560, "performance")))
    return sg.generate_trace(profile, 600, 12, schedule, gap_fraction=0.05)


# acceptance results, filled in by test_acceptance and printed at the end of the run
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(k: int, ok: bool, detail: str):
        ACCEPTANCE[k] = (bool(ok), detail)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}")
