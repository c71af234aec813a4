import numpy as np
import pytest

from distlearn.core import AgentSpec, BeliefState, LikelihoodModel

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def random_simplex(rng, size, floor=0.0):
    """Dirichlet draw, optionally mixed with the uniform vector so every entry exceeds ``floor``."""
    p = rng.dirichlet(np.ones(size))
    if floor:
        p = (1 - floor * size) * p + floor
    return p


def random_model(rng, m, S, floor=0.02):
    table = np.stack([random_simplex(rng, S, floor) for _ in range(m)])
    f = random_simplex(rng, S, floor)
    return LikelihoodModel.with_realized_floor(table, f)


def random_belief(rng, m, zeros=False):
    p = random_simplex(rng, m)
    if zeros and m > 1:
        p[rng.random(m) < 0.3] = 0.0
        if p.sum() == 0:
            p[rng.integers(m)] = 1.0
    return BeliefState.from_probabilities(p / p.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def coverage_agents():
    """Six identical agents with a strict gap: theta1 matches the data exactly."""
    model = LikelihoodModel.with_realized_floor([[0.8, 0.2], [0.3, 0.7], [0.2, 0.8]], [0.8, 0.2])
    return tuple(AgentSpec(model) for _ in range(6))


# -- acceptance reporting ---------------------------------------------------------

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion under test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    detail = getattr(item, "criterion_detail", "")
    _CRITERIA[number] = ("PASS" if report.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        line = f"criterion {number:2d} {status}: {title}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture
def report(request):
    """Attach a short measured summary to the acceptance line of the running test."""

    def _report(text):
        request.node.criterion_detail = text
        print(text)

    return _report
