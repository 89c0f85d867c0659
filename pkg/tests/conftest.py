import pytest

from cdmkit.network import Network

# Worked example: layers {1,2,3}, {4,5,6}, {7,8}, {9}; only 2 and 3 lead to 7, both through 5.
LAYERED_EDGES = [(0, 1), (0, 2), (0, 3), (1, 4), (2, 4), (2, 5), (3, 5), (3, 6),
              (5, 7), (6, 8), (7, 9)]
CASE_A_EDGES = [(0, 1), (1, 2)]
CASE_B_EDGES = [(0, 1), (0, 2), (2, 3), (3, 4)]
CASE_C_EDGES = [(0, 1), (0, 2), (0, 3), (1, 4), (3, 4)]
CASE_D_EDGES = [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)]


@pytest.fixture
def layered_net():
    return Network.from_edges(LAYERED_EDGES)


@pytest.fixture
def basic_cases():
    return {name: Network.from_edges(edges) for name, edges in
            {"a": CASE_A_EDGES, "b": CASE_B_EDGES, "c": CASE_C_EDGES, "d": CASE_D_EDGES}.items()}


_acceptance = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
