import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lloqss.config import SystemConfig  # noqa: E402


@pytest.fixture
def table_cfg():
    """Global parameters, symmetric two-user system at 50 km."""
    return SystemConfig().with_distance(50.0)
