import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fingait import KinematicSpace, SearchConfig, SyntheticSurrogate

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def space():
    return KinematicSpace()


@pytest.fixture
def surrogate():
    return SyntheticSurrogate()


@pytest.fixture
def search_cfg():
    return SearchConfig()


def random_feasible_gaits(space, n, seed):
    """Uniform draws from the box, keeping the attainable ones."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        g = space.lower_bounds + rng.random(4) * (space.upper_bounds - space.lower_bounds)
        if space.feasible(g):
            out.append(g)
    return np.array(out)


_VERDICTS = []


class _Verdict:
    """Records one PASS/FAIL line per acceptance criterion."""

    def __init__(self, label):
        self.label = label
        self.details = []

    def note(self, text):
        self.details.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = "; ".join(self.details)
        if exc_type is not None:
            detail = f"{detail}; {exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}".lstrip("; ")
        line = f"{status} {self.label}" + (f" ({detail})" if detail else "")
        _VERDICTS.append(line)
        print(line)
        return False


@pytest.fixture
def verdict():
    return _Verdict


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
