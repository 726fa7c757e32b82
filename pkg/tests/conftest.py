import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rtsched.model import NetworkModel, frame_from_masks, workers_to_mask  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def fig1_model():
    """Two apps, four workers; app 1 uses workers 1-2, app 2 uses workers 2-4."""
    gen = [[1, 1, 0, 0], [0, 1, 1, 1]]
    probs = [[0.8] * 4, [0.9] * 4]
    return NetworkModel.constant(gen, probs)


@pytest.fixture
def fig1_frame():
    return frame_from_masks([workers_to_mask([0, 1]), workers_to_mask([1, 2, 3])])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
