"""Evaluation: episodes, repeats, metrics, sweeps, and parallel soundness."""

from __future__ import annotations

import pytest

from ttsreplay.controllers import ControllerSpec, default_round_policy_spec
from ttsreplay.evaluation import (
    EvalConfig,
    curve_to_csv,
    evaluate,
    run_episode,
    sweep,
)
from ttsreplay.trajectory_data import (
    SyntheticGenConfig,
    generate_synthetic,
    subsample_permutation,
)
from conftest import make_pool


@pytest.fixture(scope="module")
def small_bench():
    config = SyntheticGenConfig(
        question_count=6,
        pool_size=8,
        max_depth=6,
        correct_rate=0.85,
        stabilize_depth_distribution=(0.4, 0.4, 0.2),
        seed=21,
    )
    return generate_synthetic(config)


def test_sc_episode_canonical(canonical_pool, identity_order):
    result = run_episode(ControllerSpec("sc", {"width": 3}), 1.0, canonical_pool, identity_order)
    assert result.correct and result.answer == "42"
    assert result.interval_cost == 6.0


def test_episode_determinism(canonical_pool, identity_order):
    spec = default_round_policy_spec()
    a = run_episode(spec, 0.5, canonical_pool, identity_order)
    b = run_episode(spec, 0.5, canonical_pool, identity_order)
    assert a == b


def test_forced_answer_on_misbehaving_controller(canonical_pool, identity_order, monkeypatch):
    import ttsreplay.evaluation as ev
    from ttsreplay.controllers import BaseController
    from ttsreplay.replay_core import Action, ActionKind

    class AlwaysBranch(BaseController):
        def decide(self, obs):
            return Action.branch()

    monkeypatch.setattr(ev, "instantiate", lambda spec, beta: AlwaysBranch())
    result = ev.run_episode(ControllerSpec("sc", {"width": 1}), 1.0, canonical_pool, identity_order)
    # branching past the pool size is inadmissible; the runner forces answer
    assert result.forced_answer
    assert result.trace.events[-1].action.kind is ActionKind.ANSWER
    assert result.trace.forced_answer
    assert len([e for e in result.trace.events if e.action.kind is ActionKind.BRANCH]) == 3


def test_evaluate_canonical_metrics(canonical_pool):
    config = EvalConfig(repeats=2, seed=0, beta_grid=(1.0,))
    result = evaluate(ControllerSpec("sc", {"width": 3}), 1.0, [canonical_pool], config)
    m = result.metrics
    # SC@3 exhausts all three trajectories regardless of permutation
    assert m.accuracy == 1.0
    assert m.mean_intervals == 6.0
    assert m.mean_tokens == 2800.0
    assert m.episode_count == 2


def test_objective_gamma_zero_equals_accuracy(small_bench):
    config = EvalConfig(repeats=4, seed=1, gamma=0.0)
    result = evaluate(ControllerSpec("sc", {"width": 4}), 1.0, small_bench, config)
    assert result.metrics.objective == pytest.approx(result.metrics.accuracy, abs=1e-12)


def test_objective_arithmetic():
    pool = make_pool("o", "1", [[(500, "1"), (100, "1")]] * 3)
    config = EvalConfig(repeats=2, gamma=0.01)
    result = evaluate(ControllerSpec("sc", {"width": 3}), 1.0, [pool], config)
    assert result.metrics.accuracy == 1.0
    assert result.metrics.mean_intervals == 6.0
    assert result.metrics.objective == pytest.approx(0.94)


def test_metric_consistency(small_bench):
    config = EvalConfig(repeats=8, seed=3, gamma=0.02)
    result = evaluate(default_round_policy_spec(), 0.5, small_bench, config)
    m = result.metrics
    assert m.objective == pytest.approx(m.accuracy - 0.02 * m.mean_intervals, abs=1e-9)


def test_fairness_same_permutations(small_bench):
    # permutations depend only on (question, repeat, seed), never the spec
    for pool in small_bench:
        for repeat in (0, 5):
            assert subsample_permutation(pool, repeat, 9) == subsample_permutation(pool, repeat, 9)


def test_parallel_soundness(small_bench):
    spec = default_round_policy_spec()
    serial = evaluate(spec, 0.5, small_bench, EvalConfig(repeats=6, seed=2, workers=1))
    parallel = evaluate(spec, 0.5, small_bench, EvalConfig(repeats=6, seed=2, workers=3))
    assert serial.metrics == parallel.metrics
    stripped = [
        (e.question_id, e.repeat_index, e.answer, e.correct, e.interval_cost, e.token_cost)
        for e in serial.episodes
    ]
    stripped_parallel = [
        (e.question_id, e.repeat_index, e.answer, e.correct, e.interval_cost, e.token_cost)
        for e in parallel.episodes
    ]
    assert stripped == stripped_parallel


def test_sweep_cardinality_and_order(canonical_pool):
    config = EvalConfig(repeats=1, beta_grid=(0.5, 1.0))
    result = sweep(ControllerSpec("sc", {"width": 3}), [canonical_pool], config)
    assert [p.beta for p in result.points] == [0.5, 1.0]


def test_sweep_beta_independent_controller_is_flat(small_bench):
    config = EvalConfig(repeats=4, seed=5, beta_grid=(0.25, 0.5, 0.75, 1.0))
    result = sweep(ControllerSpec("sc", {"width": 6}), small_bench, config)
    first = result.points[0]
    for point in result.points[1:]:
        assert (point.accuracy, point.mean_intervals, point.mean_tokens) == (
            first.accuracy,
            first.mean_intervals,
            first.mean_tokens,
        )


def test_round_policy_cost_weakly_increasing_in_beta(small_bench):
    config = EvalConfig(repeats=16, seed=4, beta_grid=(0.25, 0.5, 0.75, 1.0))
    result = sweep(default_round_policy_spec(), small_bench, config)
    costs = [p.mean_intervals for p in result.points]
    for lo, hi in zip(costs, costs[1:]):
        assert hi >= lo * 0.98


def test_trace_cap_keeps_first_repeat(small_bench):
    config = EvalConfig(repeats=3, trace_repeat_cap=1)
    result = evaluate(ControllerSpec("sc", {"width": 2}), 1.0, small_bench[:2], config)
    for episode in result.episodes:
        assert (episode.trace is not None) == (episode.repeat_index == 0)
    assert len(result.digests) == len(result.episodes)


def test_curve_csv_shape(canonical_pool):
    config = EvalConfig(repeats=1, beta_grid=(0.5, 1.0))
    result = sweep(ControllerSpec("sc", {"width": 3}), [canonical_pool], config)
    csv = curve_to_csv(result.points)
    lines = csv.strip().split("\n")
    assert lines[0] == "beta,accuracy,mean_intervals,mean_tokens,objective"
    assert len(lines) == 3


def test_eval_config_validation():
    with pytest.raises(ValueError):
        EvalConfig(repeats=0)
    with pytest.raises(ValueError):
        EvalConfig(beta_grid=(0.5, 0.5))
    with pytest.raises(ValueError):
        EvalConfig(gamma=-1.0)
    with pytest.raises(ValueError):
        evaluate(ControllerSpec("sc", {"width": 1}), 1.0, [], EvalConfig())
