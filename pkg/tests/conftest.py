import pytest

from levyqsd import BMDrift, CPExpDrift, Meromorphic

BM = BMDrift(1.0, 1.0)
CP = CPExpDrift(2.0, 1.0, 1.0)
CP_FAST = CPExpDrift(1.0, 1.0, 4.0)
MERO = Meromorphic(-1.5, 0.5, ((5.0, 2.0), (10.0, 4.0)))
MERO_FV = Meromorphic(-1.5, 0.0, ((5.0, 2.0), (10.0, 4.0)))
MERO_ONE = Meromorphic(-1.0, 0.0, ((2.0, 1.5),))

ALL_MODELS = [BM, CP, CP_FAST, MERO, MERO_FV, MERO_ONE]
IDS = ["bm", "cp", "cp_fast", "mero", "mero_fv", "mero_one"]


@pytest.fixture(params=ALL_MODELS, ids=IDS)
def model(request):
    return request.param


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
