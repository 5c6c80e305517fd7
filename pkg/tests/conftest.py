import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def derived():
    """Reference values frozen from tests/oracles/derive_values.py."""
    return json.loads((FIXTURES / "derived_values.json").read_text())
