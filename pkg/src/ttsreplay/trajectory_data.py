"""Trajectory pools: loading, validation, persistence, and synthetic generation.

A pool holds every pre-collected reasoning trajectory for one question. Each
trajectory is segmented into fixed-size token intervals, and each interval
carries the answer a probe of that prefix would reveal (``None`` when the
prefix yields no parseable answer). Pools are immutable after construction
and safe to share across concurrent episode runners.

Dataset format: one JSON record per line with fields ``question_id``,
``ground_truth``, ``delta_tokens`` and ``trajectories`` (array of arrays of
``{"tokens": int, "answer": str|null}``).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import InvalidPoolError, PoolFormatError

NO_ANSWER = None  # sentinel for intervals whose prefix has no parseable answer


@dataclass(frozen=True)
class Interval:
    tokens: int
    answer: str | None


@dataclass(frozen=True)
class Trajectory:
    intervals: tuple[Interval, ...]

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def final_answer(self) -> str | None:
        return self.intervals[-1].answer


@dataclass(frozen=True)
class TrajectoryPool:
    question_id: str
    ground_truth: str
    delta_tokens: int
    trajectories: tuple[Trajectory, ...]

    @property
    def size(self) -> int:
        return len(self.trajectories)

    @property
    def max_depth(self) -> int:
        return max(len(t) for t in self.trajectories)


def validate_pool(pool: TrajectoryPool) -> None:
    """Check structural invariants; raise InvalidPoolError naming the rule."""

    def bad(rule: str) -> InvalidPoolError:
        return InvalidPoolError(f"invalid-pool: question {pool.question_id!r}: {rule}")

    if pool.delta_tokens < 1:
        raise bad("delta_tokens must be >= 1")
    if pool.size < 1:
        raise bad("pool must hold at least one trajectory")
    for ti, traj in enumerate(pool.trajectories):
        if len(traj) < 1:
            raise bad(f"trajectory {ti} has no intervals")
        for k, iv in enumerate(traj.intervals):
            last = k == len(traj) - 1
            if not last and iv.tokens != pool.delta_tokens:
                raise bad(
                    f"trajectory {ti} interval {k} has {iv.tokens} tokens, "
                    f"expected delta {pool.delta_tokens}"
                )
            if last and not (1 <= iv.tokens <= pool.delta_tokens):
                raise bad(
                    f"trajectory {ti} final interval has {iv.tokens} tokens, "
                    f"expected 1..{pool.delta_tokens}"
                )


def _canon(answer: object) -> str | None:
    if answer is None:
        return None
    return str(answer).strip()


def pool_from_record(record: dict, locus: str = "record") -> TrajectoryPool:
    """Build one pool from a parsed dataset record; validates on the way."""
    for field in ("question_id", "ground_truth", "delta_tokens", "trajectories"):
        if field not in record:
            raise PoolFormatError(f"format: {locus}: missing field {field!r}")
    raw_trajs = record["trajectories"]
    if not isinstance(raw_trajs, list):
        raise PoolFormatError(f"format: {locus}: trajectories must be an array")
    trajectories = []
    for ti, raw in enumerate(raw_trajs):
        if not isinstance(raw, list):
            raise PoolFormatError(f"format: {locus}: trajectory {ti} must be an array")
        intervals = []
        for k, iv in enumerate(raw):
            if not isinstance(iv, dict) or "tokens" not in iv or "answer" not in iv:
                raise PoolFormatError(
                    f"format: {locus}: trajectory {ti} interval {k} needs tokens/answer"
                )
            if not isinstance(iv["tokens"], int):
                raise PoolFormatError(
                    f"format: {locus}: trajectory {ti} interval {k} tokens must be int"
                )
            intervals.append(Interval(tokens=iv["tokens"], answer=_canon(iv["answer"])))
        trajectories.append(Trajectory(intervals=tuple(intervals)))
    pool = TrajectoryPool(
        question_id=str(record["question_id"]),
        ground_truth=str(record["ground_truth"]).strip(),
        delta_tokens=int(record["delta_tokens"]),
        trajectories=tuple(trajectories),
    )
    validate_pool(pool)
    return pool


def pool_to_record(pool: TrajectoryPool) -> dict:
    return {
        "question_id": pool.question_id,
        "ground_truth": pool.ground_truth,
        "delta_tokens": pool.delta_tokens,
        "trajectories": [
            [{"tokens": iv.tokens, "answer": iv.answer} for iv in traj.intervals]
            for traj in pool.trajectories
        ],
    }


def load_pools(path: str | Path) -> list[TrajectoryPool]:
    """Load and validate every pool in a line-delimited dataset file."""
    pools = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PoolFormatError(f"format: {path}: line {ln}: {exc}") from exc
            if not isinstance(record, dict):
                raise PoolFormatError(f"format: {path}: line {ln}: record must be an object")
            pools.append(pool_from_record(record, locus=f"{path}: line {ln}"))
    return pools


def save_pools(path: str | Path, pools: Iterable[TrajectoryPool]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for pool in pools:
            fh.write(json.dumps(pool_to_record(pool)) + "\n")


# ---------------------------------------------------------------------------
# Synthetic pools


@dataclass(frozen=True)
class SyntheticGenConfig:
    """Parametric generator so every property is testable without LLM calls.

    ``stabilize_depth_distribution`` gives relative weights for the depth at
    which a trajectory's answer stops changing (index 0 = depth 1). Before
    that depth the trajectory emits noise drawn from ``pre_stabilization_noise``
    distinct wrong answers plus the no-answer sentinel.
    """

    question_count: int
    pool_size: int
    max_depth: int
    correct_rate: float
    stabilize_depth_distribution: tuple[float, ...]
    pre_stabilization_noise: int = 3
    delta_tokens: int = 500
    seed: int = 0

    def __post_init__(self) -> None:
        if self.question_count < 1 or self.pool_size < 1 or self.max_depth < 1:
            raise ValueError("question_count, pool_size and max_depth must be >= 1")
        if not 0.0 <= self.correct_rate <= 1.0:
            raise ValueError("correct_rate must lie in [0, 1]")
        weights = self.stabilize_depth_distribution
        if not weights or len(weights) > self.max_depth:
            raise ValueError("stabilize weights must cover depths 1..max_depth")
        if any(w < 0 for w in weights) or sum(weights) <= 0:
            raise ValueError("stabilize weights must be nonnegative with positive mass")
        if self.pre_stabilization_noise < 1:
            raise ValueError("pre_stabilization_noise must be >= 1")
        if self.delta_tokens < 1:
            raise ValueError("delta_tokens must be >= 1")


def early_stabilization_weights(early_mass: float, by_depth: int, max_depth: int) -> tuple[float, ...]:
    """Weights putting ``early_mass`` uniformly on depths 1..by_depth."""
    if not 0.0 <= early_mass <= 1.0 or not 1 <= by_depth <= max_depth:
        raise ValueError("bad early-stabilization parameters")
    late = max_depth - by_depth
    weights = [early_mass / by_depth] * by_depth
    if late:
        weights += [(1.0 - early_mass) / late] * late
    return tuple(weights)


def generate_synthetic(config: SyntheticGenConfig) -> list[TrajectoryPool]:
    """Generate pools deterministically from the config seed."""
    rng = np.random.Generator(np.random.PCG64(config.seed))
    weights = np.asarray(config.stabilize_depth_distribution, dtype=float)
    weights = weights / weights.sum()
    depths = np.arange(1, len(weights) + 1)
    noise = config.pre_stabilization_noise
    pools = []
    for qi in range(config.question_count):
        truth_num = int(rng.integers(0, 900))
        truth = str(truth_num)
        wrongs = [str(truth_num + 1 + j) for j in range(noise)]
        trajectories = []
        for _ in range(config.pool_size):
            stab = int(rng.choice(depths, p=weights))
            if rng.random() < config.correct_rate:
                final = truth
            else:
                final = wrongs[int(rng.integers(0, noise))]
            intervals = []
            for k in range(1, config.max_depth + 1):
                if k >= stab:
                    ans: str | None = final
                else:
                    pick = int(rng.integers(0, noise + 1))
                    ans = NO_ANSWER if pick == noise else wrongs[pick]
                if k < config.max_depth:
                    tokens = config.delta_tokens
                else:
                    tokens = int(rng.integers(1, config.delta_tokens + 1))
                intervals.append(Interval(tokens=tokens, answer=ans))
            trajectories.append(Trajectory(intervals=tuple(intervals)))
        pools.append(
            TrajectoryPool(
                question_id=f"synth-{qi:04d}",
                ground_truth=truth,
                delta_tokens=config.delta_tokens,
                trajectories=tuple(trajectories),
            )
        )
    return pools


# ---------------------------------------------------------------------------
# Per-repeat subsampling


def subsample_permutation(pool: TrajectoryPool, repeat_index: int, seed: int) -> tuple[int, ...]:
    """Deterministic branch-order permutation of the pool's trajectory indices.

    Keyed by (question_id, repeat_index, seed) through SHA-256 so results are
    stable across platforms and runs. The episode's k-th branch action
    consumes the k-th index (sampling without replacement).
    """
    key = f"{pool.question_id}\x1f{repeat_index}\x1f{seed}".encode("utf-8")
    sub_seed = int.from_bytes(hashlib.sha256(key).digest()[:8], "big")
    rng = np.random.Generator(np.random.PCG64(sub_seed))
    return tuple(int(i) for i in rng.permutation(pool.size))
