import random

import pytest

from dbcompare.groups import get_group

# backends the protocol-level suites run on
PROTOCOL_BACKENDS = ['Z7', 'Z101', 'Z11*', 'S5', 'sealed-Z101']

_acceptance_lines: list[str] = []


def record_acceptance(line: str) -> None:
    _acceptance_lines.append(line)
    print(line)


@pytest.fixture
def z7():
    return get_group('Z7')


@pytest.fixture
def s3():
    return get_group('S3')


@pytest.fixture
def rng():
    return random.Random(20251014)


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section('acceptance criteria')
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
