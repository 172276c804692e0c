import pytest

from anovapower import WorstCaseInput

# Reference sizing table: a=6, delta=1, alpha=0.05.
# Left blocks: every factorization at fixed size (bcn=24, vn=12), sorted by power.
# Right blocks: minimal designs for P >= 0.80, 0.85, 0.90, 0.95.
SIZE_TABLE = {
    "A > B~ > C~": {
        "components": {"sbA": 1 / 18, "sgAB": 1 / 9, "se": 1 / 6},
        "params": ("b", "c", "n"),
        "product": 24,
        "left": [
            ((2, 2, 6), 5, 6, 8.0, 0.271516),
            ((2, 3, 4), 5, 6, 9.3913, 0.314513),
            ((2, 4, 3), 5, 6, 10.2857, 0.342042),
            ((2, 6, 2), 5, 6, 11.3684, 0.375051),
            ((3, 2, 4), 5, 12, 11.3684, 0.527472),
            ((3, 4, 2), 5, 12, 14.4, 0.642402),
            ((4, 2, 3), 5, 18, 14.4, 0.712478),
            ((4, 3, 2), 5, 18, 16.6154, 0.781856),
            ((6, 2, 2), 5, 30, 19.6364, 0.897849),
        ],
        "right": [
            (0.80, (5, 2, 2), 5, 24, 16.3636, 0.808263),
            (0.85, (6, 2, 2), 5, 30, 19.6364, 0.897849),
            (0.90, (7, 2, 2), 5, 36, 22.9091, 0.948655),
            (0.95, (8, 2, 2), 5, 42, 26.1818, 0.97543),
        ],
    },
    "(A x C~) > B~": {
        # sigma_gamma is inactive; any value gives the same table
        "components": {"sag": 1 / 18, "sbAC": 1 / 9, "se": 1 / 6, "sg": 0.7},
        "params": ("b", "c", "n"),
        "product": 24,
        "left": [
            ((2, 2, 6), 5, 5, 8.0, 0.241845),
            ((3, 2, 4), 5, 5, 9.3913, 0.278819),
            ((4, 2, 3), 5, 5, 10.2857, 0.302586),
            ((6, 2, 2), 5, 5, 11.3684, 0.331214),
            ((2, 3, 4), 5, 10, 11.3684, 0.4915),
            ((4, 3, 2), 5, 10, 14.4, 0.602299),
            ((2, 4, 3), 5, 15, 14.4, 0.684104),
            ((3, 4, 2), 5, 15, 16.6154, 0.754655),
            ((2, 6, 2), 5, 25, 19.6364, 0.885509),
        ],
        "right": [
            (0.80, (2, 6, 2), 5, 25, 19.6364, 0.885509),
            (0.85, (2, 6, 2), 5, 25, 19.6364, 0.885509),
            (0.90, (2, 7, 2), 5, 30, 22.9091, 0.941747),
            (0.95, (2, 8, 2), 5, 35, 26.1818, 0.971837),
        ],
    },
    "V~ > A": {
        "components": {"se": 1 / 4, "snu": 2.0},
        "params": ("v", "n"),
        "product": 12,
        "left": [
            ((6, 2), 30, 36, 4.8, 0.109714),
            ((4, 3), 20, 48, 7.2, 0.210406),
            ((3, 4), 15, 54, 9.6, 0.351949),
            ((2, 6), 10, 60, 14.4, 0.659852),
        ],
        "right": [
            (0.80, (2, 8), 10, 84, 19.2, 0.829324),
            (0.85, (2, 9), 10, 96, 21.6, 0.884471),
            (0.90, (2, 10), 10, 108, 24.0, 0.923847),
            (0.95, (2, 11), 10, 120, 26.4, 0.951),
        ],
    },
}

LAMBDA_TOL = 1e-4
POWER_TOL = 5e-6


def sized_design(model, values):
    from anovapower import DesignPoint

    names = SIZE_TABLE[model]["params"]
    levels = {"a": 6, **{k: v for k, v in zip(names, values) if k != "n"}}
    return DesignPoint(levels, dict(zip(names, values))["n"])


def sized_worst_case(model):
    return WorstCaseInput.components(1.0, SIZE_TABLE[model]["components"])


def lambda_matches(value, reference):
    # reference values carry 4 decimals at most
    return abs(value - reference) <= LAMBDA_TOL


@pytest.fixture(params=sorted(SIZE_TABLE))
def sized_model(request):
    return request.param


# -- acceptance reporting ----------------------------------------------------------

_ACCEPTANCE: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion the test belongs to")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    entry = _ACCEPTANCE.setdefault(number, {"title": title, "passed": 0, "failed": 0})
    if report.failed:
        entry["failed"] += 1
    elif report.when == "call" and report.passed:
        entry["passed"] += 1


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        entry = _ACCEPTANCE[number]
        status = "PASS" if entry["failed"] == 0 and entry["passed"] > 0 else "FAIL"
        terminalreporter.write_line(
            f"ACCEPTANCE {number} [{entry['title']}]: {status} ({entry['passed']} passed, {entry['failed']} failed)"
        )
