import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from immlab.enumeration import candidate_executions
from immlab.program import parse_litmus

CORPUS_DIR = pathlib.Path(__file__).parent.parent / "corpus"
FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def corpus():
    tests = {}
    for path in sorted(CORPUS_DIR.glob("*.litmus")):
        test = parse_litmus(path.read_bytes(), str(path))
        tests[path.stem] = test
    return tests


@pytest.fixture(scope="session")
def corpus_candidates(corpus):
    return {name: list(candidate_executions(t.program)) for name, t in corpus.items()}


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES
