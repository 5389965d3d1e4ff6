import os
import sys
from pathlib import Path

import pytest

# Let the determinism test vary the splat worker count even on single-core
# machines; numba caps set_num_threads by this value at first import.
os.environ.setdefault("NUMBA_NUM_THREADS", "2")

sys.path.insert(0, str(Path(__file__).parent))

from synthetic import make_scene, make_static_scene  # noqa: E402


@pytest.fixture(scope="session")
def small_scene():
    """Moving-foreground scene at unit-test resolution."""
    return make_scene(192, 144)


@pytest.fixture(scope="session")
def small_static_scene():
    return make_static_scene(192, 144)
