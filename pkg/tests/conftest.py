import contextlib

import pytest

# (number, title, status) for every acceptance criterion that ran
ACCEPTANCE = []


@contextlib.contextmanager
def criterion(number, title):
    try:
        yield
    except BaseException:
        ACCEPTANCE.append((number, title, "FAIL"))
        print(f"criterion {number:2d} FAIL  {title}")
        raise
    ACCEPTANCE.append((number, title, "PASS"))
    print(f"criterion {number:2d} PASS  {title}")


@pytest.fixture
def acceptance():
    return criterion


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}")
