from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(Path(__file__).parent))

from seb.parser import parse_activity_file  # noqa: E402


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return ROOT / "corpus"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return ROOT / "fixtures"


@pytest.fixture(scope="session")
def quotecomparer(corpus_dir):
    return parse_activity_file(corpus_dir / "quotecomparer.seb")


def corpus_activities():
    return sorted((ROOT / "corpus").glob("*.seb"))
