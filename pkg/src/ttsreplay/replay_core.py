"""Replay MDP over pre-collected trajectory pools.

An episode replays one question. The state tracks every instantiated branch
(its depth in generation intervals, whether it is still active, and which
pool trajectory backs it), the set of revealed probe answers, and a
terminated flag. Five atomic actions drive it:

  branch       instantiate the next unused pool trajectory at depth 1
  continue(i)  advance branch i by one interval
  probe(i)     reveal branch i's answer at its current depth
  prune(i)     drop branch i from the active set, freezing its depth
  answer       terminate and hand the state to an aggregation rule

Computation cost is measured in interval units: the sum of all branch depths
plus ``kappa_probe`` per revealed probe. Exact token counts are reported
separately via :func:`token_cost_of`.

All transitions are pure: ``apply_action`` never mutates its input, so a
fixed (pool, permutation, action sequence) triple always reproduces the same
states bit for bit. Replay gating beyond the base action semantics:
``continue`` is inadmissible once a branch has consumed its whole backing
trajectory, and ``branch`` is inadmissible once every pool trajectory is in
use.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Sequence

from .errors import AggregationError, EpisodeFinishedError, InadmissibleActionError
from .trajectory_data import TrajectoryPool


class ActionKind(str, Enum):
    BRANCH = "branch"
    CONTINUE = "continue"
    PROBE = "probe"
    PRUNE = "prune"
    ANSWER = "answer"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    branch_id: int | None = None

    def __str__(self) -> str:
        if self.branch_id is None:
            return self.kind.value
        return f"{self.kind.value}({self.branch_id})"

    @staticmethod
    def branch() -> "Action":
        return Action(ActionKind.BRANCH)

    @staticmethod
    def continue_(branch_id: int) -> "Action":
        return Action(ActionKind.CONTINUE, branch_id)

    @staticmethod
    def probe(branch_id: int) -> "Action":
        return Action(ActionKind.PROBE, branch_id)

    @staticmethod
    def prune(branch_id: int) -> "Action":
        return Action(ActionKind.PRUNE, branch_id)

    @staticmethod
    def answer() -> "Action":
        return Action(ActionKind.ANSWER)


def action_to_dict(action: Action) -> dict:
    out: dict = {"kind": action.kind.value}
    if action.branch_id is not None:
        out["branch"] = action.branch_id
    return out


def action_from_dict(record: Mapping) -> Action:
    return Action(ActionKind(record["kind"]), record.get("branch"))


@dataclass(frozen=True)
class BranchRecord:
    branch_id: int          # 1-based
    depth: int              # intervals generated so far, >= 1
    active: bool
    pool_branch_ref: int    # 0-based index into pool.trajectories
    total_intervals: int    # length of the backing trajectory

    @property
    def exhausted(self) -> bool:
        return self.depth >= self.total_intervals


@dataclass(frozen=True)
class RevealedProbe:
    branch_id: int
    depth: int
    answer: str | None


@dataclass(frozen=True)
class ReplayState:
    question_id: str
    branches: tuple[BranchRecord, ...]
    # (branch_id, depth) -> answer; treated as immutable (copied on write)
    revealed: dict
    terminated: bool = False

    @property
    def m(self) -> int:
        return len(self.branches)

    @property
    def probes_taken(self) -> int:
        return len(self.revealed)

    @property
    def active_ids(self) -> tuple[int, ...]:
        return tuple(b.branch_id for b in self.branches if b.active)

    def branch(self, branch_id: int) -> BranchRecord:
        return self.branches[branch_id - 1]

    def revealed_probes(self) -> frozenset[RevealedProbe]:
        return frozenset(
            RevealedProbe(bid, depth, ans) for (bid, depth), ans in self.revealed.items()
        )


def initial_state(question_id: str) -> ReplayState:
    return ReplayState(question_id=question_id, branches=(), revealed={})


class TokenAccounting(str, Enum):
    INTERVAL_UNITS = "interval_units"
    EXACT_TOKENS = "exact_tokens"


@dataclass(frozen=True)
class CostModel:
    """Probe pricing plus the preferred reporting unit. The optimization
    objective always uses interval units (:func:`cost_of`); exact token
    totals come from :func:`token_cost_of` and are reported alongside."""

    kappa_probe: float = 0.0
    token_accounting: TokenAccounting = TokenAccounting.INTERVAL_UNITS

    def __post_init__(self) -> None:
        if self.kappa_probe < 0:
            raise ValueError("kappa_probe must be nonnegative")


def _admissibility_failure(state: ReplayState, action: Action, pool: TrajectoryPool) -> str | None:
    """Return None when admissible, else the reason it is not."""
    if action.kind is ActionKind.ANSWER:
        return None
    if action.kind is ActionKind.BRANCH:
        if state.m >= pool.size:
            return f"all {pool.size} pool trajectories are in use"
        return None
    bid = action.branch_id
    if bid is None or not 1 <= bid <= state.m:
        return f"branch {bid} is not instantiated (m={state.m})"
    rec = state.branch(bid)
    if not rec.active:
        return f"branch {bid} is not active"
    if action.kind is ActionKind.CONTINUE:
        if rec.exhausted:
            return f"branch {bid} exhausted its trajectory at depth {rec.depth}"
        return None
    if action.kind is ActionKind.PROBE:
        if (bid, rec.depth) in state.revealed:
            return f"branch {bid} already probed at depth {rec.depth}"
        return None
    if action.kind is ActionKind.PRUNE:
        return None
    return f"unknown action kind {action.kind!r}"


def is_admissible(state: ReplayState, action: Action, pool: TrajectoryPool) -> bool:
    if state.terminated:
        return False
    return _admissibility_failure(state, action, pool) is None


def admissible_actions(state: ReplayState, pool: TrajectoryPool) -> set[Action]:
    """The full admissible action set for a live state."""
    if state.terminated:
        raise EpisodeFinishedError("episode-finished: no actions on a terminated state")
    actions = {Action.answer()}
    if state.m < pool.size:
        actions.add(Action.branch())
    for rec in state.branches:
        if not rec.active:
            continue
        actions.add(Action.prune(rec.branch_id))
        if not rec.exhausted:
            actions.add(Action.continue_(rec.branch_id))
        if (rec.branch_id, rec.depth) not in state.revealed:
            actions.add(Action.probe(rec.branch_id))
    return actions


def apply_action(
    state: ReplayState,
    action: Action,
    pool: TrajectoryPool,
    branch_order: Sequence[int] | None = None,
) -> ReplayState:
    """Pure transition. ``branch_order`` maps the k-th branch action to a pool
    trajectory index; None means identity order."""
    if state.terminated:
        raise EpisodeFinishedError("episode-finished: cannot act on a terminated state")
    reason = _admissibility_failure(state, action, pool)
    if reason is not None:
        raise InadmissibleActionError(action, reason)

    if action.kind is ActionKind.ANSWER:
        return replace(state, terminated=True)

    if action.kind is ActionKind.BRANCH:
        ref = branch_order[state.m] if branch_order is not None else state.m
        traj = pool.trajectories[ref]
        rec = BranchRecord(
            branch_id=state.m + 1,
            depth=1,
            active=True,
            pool_branch_ref=ref,
            total_intervals=len(traj),
        )
        return replace(state, branches=state.branches + (rec,))

    bid = action.branch_id
    assert bid is not None
    rec = state.branch(bid)

    if action.kind is ActionKind.CONTINUE:
        new_rec = replace(rec, depth=rec.depth + 1)
    elif action.kind is ActionKind.PRUNE:
        new_rec = replace(rec, active=False)
    elif action.kind is ActionKind.PROBE:
        answer = pool.trajectories[rec.pool_branch_ref].intervals[rec.depth - 1].answer
        revealed = dict(state.revealed)
        revealed[(bid, rec.depth)] = answer
        return replace(state, revealed=revealed)
    else:  # pragma: no cover - guarded by admissibility
        raise InadmissibleActionError(action, "unknown action kind")

    branches = state.branches[: bid - 1] + (new_rec,) + state.branches[bid:]
    return replace(state, branches=branches)


def cost_of(state: ReplayState, model: CostModel | None = None) -> float:
    """Interval-unit cost: total depth across branches plus probe charges."""
    kappa = model.kappa_probe if model is not None else 0.0
    return float(sum(b.depth for b in state.branches) + kappa * len(state.revealed))


def token_cost_of(state: ReplayState, pool: TrajectoryPool) -> int:
    """Exact token count of every generated interval (probe reads excluded)."""
    total = 0
    for rec in state.branches:
        intervals = pool.trajectories[rec.pool_branch_ref].intervals
        total += sum(iv.tokens for iv in intervals[: rec.depth])
    return total


def aggregate_majority(state: ReplayState, pool: TrajectoryPool) -> str:
    """Default aggregation: majority over each branch's answer at its
    current/frozen depth, ties broken by the lowest branch index. Aggregation
    reads the full state, so no probe cost applies here."""
    votes: list[tuple[int, str]] = []
    for rec in state.branches:
        answer = pool.trajectories[rec.pool_branch_ref].intervals[rec.depth - 1].answer
        if answer is not None:
            votes.append((rec.branch_id, answer))
    if not votes:
        raise AggregationError(
            "no-aggregable-answer: no instantiated branch carries a parseable answer"
        )
    counts = Counter(answer for _, answer in votes)
    top = max(counts.values())
    for _, answer in votes:  # votes are in ascending branch order
        if counts[answer] == top:
            return answer
    raise AssertionError("unreachable")
