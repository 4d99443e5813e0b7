from pathlib import Path

import pytest

from fptrade.market_data import SyntheticSpec, generate_synthetic

DATA = Path(__file__).parent / "data"

_criteria: list[tuple[str, str]] = []


def synthetic(name: str):
    return generate_synthetic(SyntheticSpec.from_json(DATA / name))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def oracle_universe():
    """400 tickers in 200 correlated pairs, 500 days, tau=100."""
    return synthetic("oracle_pairs.json")


@pytest.fixture(scope="session")
def golden_universe():
    return synthetic("golden_spec.json")


@pytest.fixture(scope="session")
def mean_reverting_universe():
    return synthetic("mean_reverting.json")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        status = "PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL"
        _criteria.append((status, marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for status, name in _criteria:
        terminalreporter.write_line(f"{status}  {name}")
