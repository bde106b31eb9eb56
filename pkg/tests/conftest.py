import numpy as np
import pytest


def zscore(est, target, se):
    return abs(est - target) / se


def mean_var_se(x):
    """Sample mean, sample variance and their standard errors."""
    x = np.asarray(x, dtype=float)
    n = x.size
    c = x - x.mean()
    s2 = x.var(ddof=1)
    mu4 = np.mean(c ** 4)
    return x.mean(), s2, x.std(ddof=1) / np.sqrt(n), np.sqrt(max(mu4 - s2 * s2, 0.0) / n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


def record(criterion, ok, detail):
    """Store one acceptance line; printed in the terminal summary."""
    ACCEPTANCE.append((criterion, bool(ok), detail))
    print(f"\nACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} | {detail}", flush=True)
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    # test modules import this file as plain ``conftest``; pytest may hold another copy
    import sys
    shared = getattr(sys.modules.get("conftest"), "ACCEPTANCE", ACCEPTANCE)
    if not shared:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, ok, detail in sorted(shared, key=lambda r: str(r[0])):
        terminalreporter.write_line(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} | {detail}")
