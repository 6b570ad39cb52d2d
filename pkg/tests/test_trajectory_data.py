"""Dataset loading, synthetic generation, and subsampling."""

from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ttsreplay.errors import InvalidPoolError, PoolFormatError
from ttsreplay.trajectory_data import (
    SyntheticGenConfig,
    early_stabilization_weights,
    generate_synthetic,
    load_pools,
    save_pools,
    subsample_permutation,
)
from conftest import make_pool


def _record(question_id="q1", delta=500):
    return {
        "question_id": question_id,
        "ground_truth": "42",
        "delta_tokens": delta,
        "trajectories": [
            [{"tokens": 500, "answer": "7"}, {"tokens": 300, "answer": "42"}],
            [{"tokens": 500, "answer": None}, {"tokens": 500, "answer": "42"}],
        ],
    }


def test_load_two_question_file(tmp_path):
    path = tmp_path / "pools.jsonl"
    path.write_text(json.dumps(_record("q1")) + "\n" + json.dumps(_record("q2")) + "\n")
    pools = load_pools(path)
    assert [p.question_id for p in pools] == ["q1", "q2"]
    assert pools[0].trajectories[1].intervals[0].answer is None


def test_round_trip_bit_exact(tmp_path, canonical_pool):
    other = make_pool("q2", "x", [[(500, None), (17, "x")]])
    path = tmp_path / "pools.jsonl"
    save_pools(path, [canonical_pool, other])
    assert load_pools(path) == [canonical_pool, other]
    # and the file itself is stable under a second save
    text = path.read_text()
    save_pools(path, load_pools(path))
    assert path.read_text() == text


def test_short_middle_interval_rejected(tmp_path):
    record = _record()
    record["trajectories"][0][0]["tokens"] = 300
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(record) + "\n")
    with pytest.raises(InvalidPoolError, match="interval 0"):
        load_pools(path)


def test_empty_trajectory_list_rejected(tmp_path):
    record = _record()
    record["trajectories"] = []
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(record) + "\n")
    with pytest.raises(InvalidPoolError, match="at least one trajectory"):
        load_pools(path)


def test_oversized_final_interval_rejected(tmp_path):
    record = _record()
    record["trajectories"][0][-1]["tokens"] = 501
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(record) + "\n")
    with pytest.raises(InvalidPoolError, match="final interval"):
        load_pools(path)


def test_parse_error_carries_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(_record()) + "\n{not json\n")
    with pytest.raises(PoolFormatError, match="line 2"):
        load_pools(path)


def test_missing_field_is_format_error(tmp_path):
    record = _record()
    del record["ground_truth"]
    path = tmp_path / "bad.jsonl"
    path.write_text(json.dumps(record) + "\n")
    with pytest.raises(PoolFormatError, match="ground_truth"):
        load_pools(path)


def test_answers_trimmed_on_load(tmp_path):
    record = _record()
    record["ground_truth"] = " 42 "
    record["trajectories"][0][1]["answer"] = "42  "
    path = tmp_path / "pools.jsonl"
    path.write_text(json.dumps(record) + "\n")
    pool = load_pools(path)[0]
    assert pool.ground_truth == "42"
    assert pool.trajectories[0].intervals[1].answer == "42"


# ---------------------------------------------------------------------------
# Synthetic generation


def _config(**overrides):
    base = dict(
        question_count=3,
        pool_size=4,
        max_depth=5,
        correct_rate=0.8,
        stabilize_depth_distribution=(0.5, 0.5),
        seed=11,
    )
    base.update(overrides)
    return SyntheticGenConfig(**base)


def test_correct_rate_one_forces_truth_everywhere():
    pools = generate_synthetic(_config(correct_rate=1.0, stabilize_depth_distribution=(1.0,)))
    for pool in pools:
        for traj in pool.trajectories:
            assert all(iv.answer == pool.ground_truth for iv in traj.intervals)


def test_correct_rate_zero_never_matches_truth():
    pools = generate_synthetic(_config(correct_rate=0.0))
    for pool in pools:
        assert all(t.final_answer != pool.ground_truth for t in pool.trajectories)


def test_same_seed_bit_identical():
    assert generate_synthetic(_config()) == generate_synthetic(_config())
    assert generate_synthetic(_config(seed=12)) != generate_synthetic(_config())


def test_final_answer_rate_tracks_correct_rate():
    config = _config(question_count=40, pool_size=32, correct_rate=0.7, seed=5)
    pools = generate_synthetic(config)
    trajectories = [t for p in pools for t in p.trajectories]
    assert len(trajectories) >= 1000
    rate = sum(t.final_answer == p.ground_truth for p in pools for t in p.trajectories) / len(
        trajectories
    )
    assert abs(rate - 0.7) <= 0.03


def test_generated_pools_validate_and_save(tmp_path):
    pools = generate_synthetic(_config())
    path = tmp_path / "synth.jsonl"
    save_pools(path, pools)
    assert load_pools(path) == pools


def test_early_stabilization_weights():
    weights = early_stabilization_weights(0.9, 2, 10)
    assert len(weights) == 10
    assert sum(weights[:2]) == pytest.approx(0.9)
    assert sum(weights) == pytest.approx(1.0)


def test_config_validation():
    with pytest.raises(ValueError):
        _config(correct_rate=1.5)
    with pytest.raises(ValueError):
        _config(stabilize_depth_distribution=())
    with pytest.raises(ValueError):
        _config(stabilize_depth_distribution=(1.0,) * 6)  # longer than max_depth
    with pytest.raises(ValueError):
        _config(pre_stabilization_noise=0)


# ---------------------------------------------------------------------------
# Subsampling


def test_permutation_deterministic(canonical_pool):
    a = subsample_permutation(canonical_pool, 3, 17)
    b = subsample_permutation(canonical_pool, 3, 17)
    assert a == b
    assert sorted(a) == [0, 1, 2]


def test_permutations_vary_across_repeats():
    pool = generate_synthetic(_config(question_count=1, pool_size=16))[0]
    perms = {subsample_permutation(pool, r, 0) for r in range(64)}
    assert len(perms) > 1


def test_single_trajectory_identity(canonical_pool):
    pool = make_pool("solo", "x", [[(500, "x")]])
    assert subsample_permutation(pool, 0, 0) == (0,)


@given(st.integers(0, 50), st.integers(0, 50))
def test_permutation_is_without_replacement(repeat, seed):
    pool = generate_synthetic(_config(question_count=1, pool_size=9))[0]
    perm = subsample_permutation(pool, repeat, seed)
    assert sorted(perm) == list(range(9))
