"""Episode running, repeated evaluation, and beta sweeps.

Episodes are independent pure tasks, so evaluation parallelizes over
(question, repeat) with a deterministic reduction order: results are always
folded in task-submission order, making worker count irrelevant to the
output. Two controllers evaluated under the same (seed, repeat) see the same
branch-order permutation per question.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

from .controllers import ControllerSpec, instantiate, observe
from .errors import AggregationError
from .replay_core import (
    Action,
    CostModel,
    apply_action,
    cost_of,
    initial_state,
    is_admissible,
    token_cost_of,
)
from .tracing import EpisodeTrace, TraceDigest, TraceEvent, digest_trace
from .trajectory_data import TrajectoryPool, subsample_permutation


@dataclass(frozen=True)
class EvalConfig:
    repeats: int = 64
    seed: int = 0
    gamma: float = 0.0
    beta_grid: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    cost_model: CostModel = field(default_factory=CostModel)
    workers: int = 1
    trace_repeat_cap: int = 1  # full traces kept for repeat indices below this

    def __post_init__(self) -> None:
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if any(b2 <= b1 for b1, b2 in zip(self.beta_grid, self.beta_grid[1:])):
            raise ValueError("beta_grid must be strictly increasing")


@dataclass(frozen=True)
class EpisodeResult:
    question_id: str
    repeat_index: int
    answer: str | None
    correct: bool
    interval_cost: float
    token_cost: int
    probes_taken: int
    forced_answer: bool
    trace: EpisodeTrace | None


def run_episode(
    spec: ControllerSpec,
    beta: float,
    pool: TrajectoryPool,
    permutation: Sequence[int],
    cost_model: CostModel | None = None,
    repeat_index: int = 0,
) -> EpisodeResult:
    """Run one episode to termination, recording a full trace.

    A controller request outside the admissible set is replaced by a forced
    answer and flagged, so a sweep never aborts on a misbehaving policy.
    """
    model = cost_model or CostModel()
    controller = instantiate(spec, beta)
    state = initial_state(pool.question_id)
    events: list[TraceEvent] = []
    forced = False
    while not state.terminated:
        obs = observe(state, pool, controller.hyperparameters)
        requested = controller.decide(obs)
        if is_admissible(state, requested, pool):
            action = requested
        else:
            action = Action.answer()
            forced = True
        state = apply_action(state, action, pool, permutation)
        events.append(
            TraceEvent(
                step=len(events),
                action=action,
                active_after=len(state.active_ids),
                depths_after=tuple(b.depth for b in state.branches),
                revealed_after=state.probes_taken,
                cost_after=cost_of(state, model),
            )
        )
    try:
        answer = controller.aggregate(state, pool)
    except AggregationError:
        answer = None
    agreement = 0.0
    if state.m and answer is not None:
        matching = 0
        for rec in state.branches:
            held = pool.trajectories[rec.pool_branch_ref].intervals[rec.depth - 1].answer
            if held == answer:
                matching += 1
        agreement = matching / state.m
    trace = EpisodeTrace(
        question_id=pool.question_id,
        repeat_index=repeat_index,
        spec_digest=spec.digest(),
        beta=beta,
        permutation=tuple(permutation),
        kappa_probe=model.kappa_probe,
        events=tuple(events),
        forced_answer=forced,
        final_answer=answer,
        final_agreement=agreement,
    )
    return EpisodeResult(
        question_id=pool.question_id,
        repeat_index=repeat_index,
        answer=answer,
        correct=answer is not None and answer.strip() == pool.ground_truth.strip(),
        interval_cost=cost_of(state, model),
        token_cost=token_cost_of(state, pool),
        probes_taken=state.probes_taken,
        forced_answer=forced,
        trace=trace,
    )


@dataclass(frozen=True)
class EvalMetrics:
    beta: float
    accuracy: float
    mean_intervals: float
    mean_tokens: float
    objective: float
    mean_probes: float
    episode_count: int


@dataclass(frozen=True)
class EvalResult:
    metrics: EvalMetrics
    episodes: tuple[EpisodeResult, ...]
    digests: tuple[TraceDigest, ...]


def _episode_task(args: tuple) -> EpisodeResult:
    spec, beta, pool, repeat, seed, model = args
    permutation = subsample_permutation(pool, repeat, seed)
    return run_episode(spec, beta, pool, permutation, model, repeat_index=repeat)


def evaluate(
    spec: ControllerSpec,
    beta: float,
    pools: Sequence[TrajectoryPool],
    config: EvalConfig,
) -> EvalResult:
    """Run repeats x |pools| episodes and average the metrics."""
    if not pools:
        raise ValueError("evaluate requires at least one pool")
    tasks = [
        (spec, beta, pool, repeat, config.seed, config.cost_model)
        for pool in pools
        for repeat in range(config.repeats)
    ]

    episodes: list[EpisodeResult] = []
    digests: list[TraceDigest] = []
    n = len(tasks)
    correct_sum = 0
    interval_sum = 0.0
    token_sum = 0
    probe_sum = 0
    objective_sum = 0.0

    def fold(results: Iterator[EpisodeResult]) -> None:
        nonlocal correct_sum, interval_sum, token_sum, probe_sum, objective_sum
        for result in results:
            assert result.trace is not None
            digests.append(digest_trace(result.trace))
            correct_sum += int(result.correct)
            interval_sum += result.interval_cost
            token_sum += result.token_cost
            probe_sum += result.probes_taken
            objective_sum += int(result.correct) - config.gamma * result.interval_cost
            if result.repeat_index >= config.trace_repeat_cap:
                result = replace(result, trace=None)
            episodes.append(result)

    if config.workers == 1:
        fold(_episode_task(t) for t in tasks)
    else:
        # results folded in task-submission order, so worker count cannot
        # change the output
        chunk = max(1, len(tasks) // (config.workers * 8))
        with ProcessPoolExecutor(max_workers=config.workers) as executor:
            fold(executor.map(_episode_task, tasks, chunksize=chunk))
    metrics = EvalMetrics(
        beta=beta,
        accuracy=correct_sum / n,
        mean_intervals=interval_sum / n,
        mean_tokens=token_sum / n,
        objective=objective_sum / n,
        mean_probes=probe_sum / n,
        episode_count=n,
    )
    return EvalResult(metrics=metrics, episodes=tuple(episodes), digests=tuple(digests))


@dataclass(frozen=True)
class CurvePoint:
    beta: float
    accuracy: float
    mean_intervals: float
    mean_tokens: float
    objective: float


ScalingCurve = tuple[CurvePoint, ...]


@dataclass(frozen=True)
class SweepResult:
    points: ScalingCurve
    evals: tuple[EvalResult, ...]  # one per grid beta, same order as points


def sweep(
    spec: ControllerSpec,
    pools: Sequence[TrajectoryPool],
    config: EvalConfig,
) -> SweepResult:
    """Evaluate once per grid beta and collect the scaling curve."""
    points: list[CurvePoint] = []
    evals: list[EvalResult] = []
    for beta in config.beta_grid:
        result = evaluate(spec, beta, pools, config)
        m = result.metrics
        points.append(
            CurvePoint(
                beta=beta,
                accuracy=m.accuracy,
                mean_intervals=m.mean_intervals,
                mean_tokens=m.mean_tokens,
                objective=m.objective,
            )
        )
        evals.append(result)
    return SweepResult(points=tuple(points), evals=tuple(evals))


CURVE_HEADER = "beta,accuracy,mean_intervals,mean_tokens,objective"


def curve_to_csv(points: Sequence[CurvePoint]) -> str:
    lines = [CURVE_HEADER]
    for p in points:
        lines.append(
            f"{p.beta:g},{p.accuracy:.6f},{p.mean_intervals:.6f},"
            f"{p.mean_tokens:.6f},{p.objective:.6f}"
        )
    return "\n".join(lines) + "\n"


def episodes_to_csv(episodes: Sequence[EpisodeResult]) -> str:
    lines = ["question_id,repeat,answer,correct,intervals,tokens,probes,forced"]
    for e in episodes:
        answer = "" if e.answer is None else e.answer
        lines.append(
            f"{e.question_id},{e.repeat_index},{answer},{int(e.correct)},"
            f"{e.interval_cost:.6f},{e.token_cost},{e.probes_taken},{int(e.forced_answer)}"
        )
    return "\n".join(lines) + "\n"
