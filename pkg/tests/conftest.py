import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def suite_runs():
    """Default-config traces for seeds 0..4 of every scenario kind."""
    from occtrack import generate, run_sequence
    from occtrack.sim import KINDS

    runs = {}
    for kind in KINDS:
        for seed in range(5):
            script = generate(kind, seed)
            metrics, trace = run_sequence(script)
            runs[(kind, seed)] = (script, metrics, trace)
    return runs


def pytest_terminal_summary(terminalreporter):
    lines = []
    for mod in list(sys.modules.values()):
        lines.extend(getattr(mod, "ACCEPTANCE_RESULTS", []) or [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
