import sys
from pathlib import Path

from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

# numba compiles on first call, which would trip the per-example deadline
settings.register_profile("default", deadline=None)
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS, TITLES

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(TITLES):
        if k not in RESULTS:
            terminalreporter.write_line(f"[NOT RUN] {k:2d}. {TITLES[k]}")
            continue
        ok, detail = RESULTS[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:2d}. {TITLES[k]}: {detail}")
