import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from refdata import U6


@pytest.fixture
def u6():
    return U6.copy()
