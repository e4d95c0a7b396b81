import numpy as np
import pytest

from radius_lsh.bench import max_radius_for
from radius_lsh.datasets import gaussian_mixture
from radius_lsh.disk_index import build_index
from radius_lsh.lsh import HashFamily, derive_params
from radius_lsh.search import SearchEngine


class Small:
    """A 300-point mixture with its index, family and engine."""

    def __init__(self, directory, n=300, d=8, seed=5, page_size=256):
        self.data = gaussian_mixture(n, d, clusters=4, seed=seed).points
        self.params = derive_params(n)
        self.family = HashFamily.for_dataset(self.data, self.params.m, self.params.c,
                                             self.params.w, seed=seed)
        self.index = build_index(self.data, self.family, directory, page_size, self.params)
        self.engine = SearchEngine(self.index, self.family, self.params, self.data)
        self.max_radius = max_radius_for(self.data, self.params.c)


@pytest.fixture(scope="session")
def small(tmp_path_factory):
    return Small(tmp_path_factory.mktemp("small"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# filled by test_acceptance and echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
