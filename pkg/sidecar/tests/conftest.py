import sys
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from sidecar.app import create_app
from sidecar.toy import TokenTable, ToyEncoder

sys.path.insert(0, str(Path(__file__).parent))

from _shared import EMBEDDINGS, VOCAB  # noqa: E402


@pytest.fixture(scope="session")
def encoder():
    return ToyEncoder(TokenTable(VOCAB, EMBEDDINGS), seed=0)


@pytest.fixture(scope="session")
def client(encoder):
    return TestClient(create_app(encoder))
