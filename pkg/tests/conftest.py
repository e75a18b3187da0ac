from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import settings

from ebforge.frontend import load

CORPUS = Path(__file__).resolve().parents[1] / "src" / "ebforge" / "corpus"

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture(scope="session")
def corpus():
    return CORPUS


@pytest.fixture(scope="session")
def minsearch():
    return load(CORPUS / "minsearch.eb")


@pytest.fixture(scope="session")
def seed():
    return load(CORPUS / "minsearch_seed.eb")


@pytest.fixture(scope="session")
def broken():
    return load(CORPUS / "broken_init.eb")


@pytest.fixture(scope="session")
def seed_store(seed):
    from ebforge.proof import prove_all
    from ebforge.semantics import development_pos
    return prove_all(development_pos(seed))


def pytest_terminal_summary(terminalreporter):
    from tests_support import ACCEPTANCE
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
