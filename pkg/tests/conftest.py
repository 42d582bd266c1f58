import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from civi.loader import load_entry  # noqa: E402
from civi.sorts import Instance  # noqa: E402

DEFAULT_SEED = 20240611
_ACCEPT: dict[int, str] = {}


def pytest_addoption(parser):
    parser.addoption("--civi-seed", type=int, default=None, help="seed for the randomized suites")


@pytest.fixture(scope="session")
def seed(request) -> int:
    opt = request.config.getoption("--civi-seed")
    if opt is not None:
        return opt
    return int(os.environ.get("CIVI_SEED", DEFAULT_SEED))


@pytest.fixture(scope="session")
def toy():
    return load_entry("toy2pc")


@pytest.fixture(scope="session")
def twophase():
    return load_entry("twophase")


@pytest.fixture(scope="session")
def mongo():
    return load_entry("mongo")


def rms(n: int) -> Instance:
    return Instance({"RMs": tuple(f"r{i}" for i in range(1, n + 1))})


@pytest.fixture(scope="session")
def one():
    return rms(1)


@pytest.fixture(scope="session")
def two():
    return rms(2)


def record_acceptance(n: int, ok: bool, detail: str = "") -> None:
    _ACCEPT[n] = ("PASS" if ok else "FAIL") + (f"  {detail}" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPT:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPT):
        terminalreporter.write_line(f"[ACCEPT {n}] {_ACCEPT[n]}")
