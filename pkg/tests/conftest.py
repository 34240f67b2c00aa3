import pytest

from strateval import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def mqm_like():
    """Mid-sized synthetic set with document structure and three metrics."""
    return generate_synthetic(
        SyntheticSpec(
            n_segments=200,
            n_documents=12,
            metric_corrs=(0.45, 0.3, 0.6),
            seed=3,
        )
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep.criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion, in declaration order."""
    rows = []
    statuses = (
        ("passed", "PASS"),
        ("failed", "FAIL"),
        ("error", "FAIL"),
        ("skipped", "SKIP"),
    )
    for status, label in statuses:
        for rep in terminalreporter.stats.get(status, []):
            name = getattr(rep, "criterion", None)
            if name is not None and rep.when in ("call", "setup"):
                rows.append((name, label, getattr(rep, "duration", 0.0)))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for name, label, duration in rows:
        terminalreporter.write_line(f"{label}  {name}  ({duration:.1f}s)")
