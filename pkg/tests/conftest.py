from __future__ import annotations

import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from ttsreplay.trajectory_data import Interval, Trajectory, TrajectoryPool

settings.register_profile("suite", max_examples=60, derandomize=True)
settings.load_profile("suite")


def make_pool(question_id, ground_truth, trajectories, delta=500):
    """Compact pool builder: trajectories as lists of (tokens, answer)."""
    trajs = tuple(
        Trajectory(tuple(Interval(tok, ans) for tok, ans in raw)) for raw in trajectories
    )
    return TrajectoryPool(question_id, ground_truth, delta, trajs)


@pytest.fixture
def canonical_pool():
    """Three trajectories, truth 42: lengths 3/2/1, finals 42/41/42."""
    return make_pool(
        "q1",
        "42",
        [
            [(500, "7"), (500, "42"), (300, "42")],
            [(500, "41"), (500, "41")],
            [(500, "42")],
        ],
    )


@pytest.fixture
def identity_order(canonical_pool):
    return tuple(range(canonical_pool.size))
