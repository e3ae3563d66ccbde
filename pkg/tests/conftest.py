import pytest

from psoc.dsl import parse
from psoc.pipeline import case_study_text


@pytest.fixture(scope="session")
def case_text():
    return case_study_text()


@pytest.fixture
def model(case_text):
    return parse(case_text)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
