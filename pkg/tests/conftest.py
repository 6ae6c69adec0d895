import pytest

from twophoton import pipeline


@pytest.fixture(scope="session")
def system_01():
    """Driven system at g2 = 0.1 with the default weak qubit drive."""
    return pipeline.assemble(pipeline.DrivenSetup(0.1))


@pytest.fixture(scope="session")
def small_system():
    """Cheap driven system (4 levels per parity, k_max = 2) for exhaustive decompositions."""
    return pipeline.assemble(pipeline.DrivenSetup(0.1, n_per_parity=4, k_max=2, n_max=60))


@pytest.fixture(scope="session")
def wide_system():
    """As ``small_system`` with k_max = 6, so that harmonic truncation is negligible."""
    return pipeline.assemble(pipeline.DrivenSetup(0.1, n_per_parity=4, k_max=6, n_max=60))


_ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one pass/fail line for an acceptance criterion."""

    def record(label: str, checks: dict) -> bool:
        ok = all(passed for passed, _ in checks.values())
        detail = "; ".join(f"{k}={v} [{'ok' if p else 'FAIL'}]" for k, (p, v) in checks.items())
        line = f"{label}: {'PASS' if ok else 'FAIL'} | {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
