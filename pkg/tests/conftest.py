import time

FULL_SUITE_BUDGET_S = 60.0


def pytest_sessionstart(session):
    session.config._suite_t0 = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - config._suite_t0
    verdict = "PASS" if elapsed < FULL_SUITE_BUDGET_S else "FAIL"
    terminalreporter.write_line(
        f"ACCEPTANCE {verdict}: full suite wall clock {elapsed:.1f}s "
        f"(budget {FULL_SUITE_BUDGET_S:.0f}s)")
