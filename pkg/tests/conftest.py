import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_log  # noqa: E402


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        passed = rep.passed and not hasattr(rep, "wasxfail")
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        acceptance_log.record(marker.args[0], item.name, "PASS" if passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance_log.RESULTS):
        rows = acceptance_log.RESULTS[n]
        ok = all(o == "PASS" for _, o, _ in rows)
        parts = [f"{name} {o}" + (f" ({detail})" if detail else "") for name, o, detail in rows]
        terminalreporter.write_line(f"C{n} {'PASS' if ok else 'FAIL'}: " + " | ".join(parts))
