from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def example1_text() -> str:
    return (FIXTURES / "example1.pl").read_text()


@pytest.fixture(scope="session")
def listing1_text() -> str:
    return (FIXTURES / "listing1.pl").read_text()


@pytest.fixture(scope="session")
def listing2_text() -> str:
    return (FIXTURES / "listing2.pl").read_text()


@pytest.fixture(scope="session")
def listing3_text() -> str:
    return (FIXTURES / "listing3.pl").read_text()
