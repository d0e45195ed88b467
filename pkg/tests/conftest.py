import numpy as np
import pytest

from spla import CovMatrix, DataMatrix, load_csv, sample_cov, standardize
from importlib import resources


@pytest.fixture(scope="session")
def oecd_data() -> DataMatrix:
    path = resources.files("spla") / "fixtures" / "oecd.csv"
    with resources.as_file(path) as p:
        return load_csv(p)


@pytest.fixture(scope="session")
def exam_data() -> DataMatrix:
    path = resources.files("spla") / "fixtures" / "exam.csv"
    with resources.as_file(path) as p:
        return load_csv(p)


@pytest.fixture(scope="session")
def oecd_corr(oecd_data) -> CovMatrix:
    return sample_cov(standardize(oecd_data))


@pytest.fixture(scope="session")
def exam_cov(exam_data) -> CovMatrix:
    return sample_cov(exam_data)


def random_spd(rng: np.random.Generator, m: int) -> np.ndarray:
    a = rng.normal(size=(m, m))
    return a @ a.T + m * np.eye(m)


#: One verdict line per acceptance criterion, printed in the summary below.
RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
