"""Controller contract, baseline policies, and the tunable round-policy family.

A controller sees only an :class:`Observation` (never an unrevealed probe
answer), emits one atomic action per step, and may carry per-episode memory.
Every controller is described by a serializable :class:`ControllerSpec`; for
the ``round_policy`` family each listed hyperparameter derives from a single
scalar ``beta`` through a declared monotone map, so that larger beta always
means a larger compute budget.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import InvalidSpecError
from .replay_core import (
    Action,
    ActionKind,
    ReplayState,
    aggregate_majority,
)
from .trajectory_data import TrajectoryPool

# ---------------------------------------------------------------------------
# Observation: the controller-visible projection of the state


@dataclass(frozen=True)
class BranchView:
    branch_id: int
    depth: int
    active: bool
    exhausted: bool
    revealed: tuple[tuple[int, str | None], ...]  # (depth, answer), ascending depth

    def latest_probe(self) -> tuple[int, str | None] | None:
        return self.revealed[-1] if self.revealed else None

    def probed_at_current_depth(self) -> bool:
        return bool(self.revealed) and self.revealed[-1][0] == self.depth


@dataclass(frozen=True)
class Observation:
    question_id: str
    branches: tuple[BranchView, ...]
    intervals_used: int
    probes_taken: int
    pool_size: int
    hyperparameters: Mapping[str, object]

    def active_branches(self) -> tuple[BranchView, ...]:
        return tuple(b for b in self.branches if b.active)

    def branch(self, branch_id: int) -> BranchView:
        return self.branches[branch_id - 1]


def observe(
    state: ReplayState,
    pool: TrajectoryPool,
    hyperparameters: Mapping[str, object] | None = None,
) -> Observation:
    """Project a state into the controller-visible view. Only answers in the
    revealed set appear; pool contents stay hidden."""
    per_branch: dict[int, list[tuple[int, str | None]]] = {}
    for (bid, depth), answer in state.revealed.items():
        per_branch.setdefault(bid, []).append((depth, answer))
    views = []
    for rec in state.branches:
        probes = tuple(sorted(per_branch.get(rec.branch_id, ())))
        views.append(
            BranchView(
                branch_id=rec.branch_id,
                depth=rec.depth,
                active=rec.active,
                exhausted=rec.exhausted,
                revealed=probes,
            )
        )
    return Observation(
        question_id=state.question_id,
        branches=tuple(views),
        intervals_used=sum(b.depth for b in state.branches),
        probes_taken=state.probes_taken,
        pool_size=pool.size,
        hyperparameters=dict(hyperparameters or {}),
    )


def pool_mode(branches: Sequence[BranchView]) -> str | None:
    """Modal latest revealed answer; no-answer probes do not vote; ties go to
    the answer held by the lowest branch id. None when nothing votes."""
    votes: list[tuple[int, str]] = []
    for b in branches:
        latest = b.latest_probe()
        if latest is not None and latest[1] is not None:
            votes.append((b.branch_id, latest[1]))
    if not votes:
        return None
    counts = Counter(answer for _, answer in votes)
    top = max(counts.values())
    for _, answer in votes:
        if counts[answer] == top:
            return answer
    raise AssertionError("unreachable")


def pool_confidence(branches: Sequence[BranchView]) -> tuple[float, str | None]:
    """Fraction of the given branches whose latest revealed answer equals the
    modal answer. Branches without a usable latest answer count only in the
    denominator."""
    mode = pool_mode(branches)
    if mode is None or not branches:
        return 0.0, None
    aligned = 0
    for b in branches:
        latest = b.latest_probe()
        if latest is not None and latest[1] == mode:
            aligned += 1
    return aligned / len(branches), mode


# ---------------------------------------------------------------------------
# Specs and the beta -> hyperparameter map


@dataclass(frozen=True)
class BetaMapEntry:
    name: str
    base: float
    coefficient: float  # >= 0, applied in the budget-increasing direction


@dataclass(frozen=True)
class ControllerSpec:
    kind: str
    parameters: Mapping[str, object] = field(default_factory=dict)
    beta_map: tuple[BetaMapEntry, ...] = ()

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind, "parameters": dict(self.parameters)}
        out["beta_map"] = [
            {"name": e.name, "base": float(e.base), "coefficient": float(e.coefficient)}
            for e in self.beta_map
        ]
        return out

    @staticmethod
    def from_dict(record: Mapping) -> "ControllerSpec":
        if not isinstance(record, Mapping) or "kind" not in record:
            raise InvalidSpecError("invalid-spec: record must be an object with a kind")
        raw_map = record.get("beta_map") or []
        entries = []
        for item in raw_map:
            try:
                entries.append(
                    BetaMapEntry(
                        name=str(item["name"]),
                        base=float(item["base"]),
                        coefficient=float(item["coefficient"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise InvalidSpecError(f"invalid-spec: bad beta_map entry {item!r}") from exc
        params = record.get("parameters") or {}
        if not isinstance(params, Mapping):
            raise InvalidSpecError("invalid-spec: parameters must be an object")
        return ControllerSpec(
            kind=str(record["kind"]),
            parameters=dict(params),
            beta_map=tuple(entries),
        )

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


KINDS = ("sc", "asc", "esc", "parallel_probe", "round_policy")

# Round-policy hyperparameters, split by the direction in which raising the
# value raises the budget. A beta_map coefficient always pushes in the
# budget-increasing direction: expanding values grow with beta, contracting
# values shrink.
_EXPANDING = {
    "stop_conf_threshold",
    "stop_trend_min",
    "widen_delta_threshold",
    "max_width",
    "burst_aligned",
    "abandon_patience",
    "hard_interval_cap",
}
_CONTRACTING = {"ema_alpha"}
_INTEGER = {"max_width", "burst_aligned", "abandon_patience", "hard_interval_cap"}
_ROUND_POLICY_NAMES = _EXPANDING | _CONTRACTING

_ROUND_POLICY_DEFAULTS: dict[str, float | None] = {
    "ema_alpha": 0.3,
    "stop_conf_threshold": 0.70,
    "stop_trend_min": 0.0,
    "widen_delta_threshold": 0.01,
    "max_width": 4,
    "burst_aligned": 0,
    "abandon_patience": 2,
    "hard_interval_cap": None,
}


@dataclass(frozen=True)
class RoundPolicyParams:
    ema_alpha: float
    stop_conf_threshold: float
    stop_trend_min: float
    widen_delta_threshold: float
    max_width: int
    burst_aligned: int
    abandon_patience: int
    hard_interval_cap: int | None
    min_active: int = 2


def resolve_round_policy(spec: ControllerSpec, beta: float) -> RoundPolicyParams:
    """Instantiate the round-policy hyperparameters at one beta value.

    Mapped values use base + coefficient * beta (or minus, for contracting
    hyperparameters), then integer flooring and clamping to declared bounds.
    A value that cannot be clamped into an open bound is an invalid spec.
    """
    values: dict[str, float | None] = dict(_ROUND_POLICY_DEFAULTS)
    for name, value in spec.parameters.items():
        if name not in _ROUND_POLICY_NAMES:
            raise InvalidSpecError(f"invalid-spec: unknown round_policy parameter {name!r}")
        values[name] = None if value is None else float(value)
    for entry in spec.beta_map:
        if entry.name not in _ROUND_POLICY_NAMES:
            raise InvalidSpecError(f"invalid-spec: unknown beta_map target {entry.name!r}")
        if entry.coefficient < 0:
            raise InvalidSpecError(
                f"invalid-spec: negative budget coefficient for {entry.name!r}"
            )
        direction = 1.0 if entry.name in _EXPANDING else -1.0
        values[entry.name] = entry.base + direction * entry.coefficient * beta

    def integer(name: str, minimum: int) -> int:
        raw = values[name]
        assert raw is not None
        return max(minimum, math.floor(raw))

    ema_alpha = values["ema_alpha"]
    stop_conf = values["stop_conf_threshold"]
    assert ema_alpha is not None and stop_conf is not None
    if ema_alpha <= 0:
        raise InvalidSpecError("invalid-spec: ema_alpha must be positive")
    if stop_conf <= 0:
        raise InvalidSpecError("invalid-spec: stop_conf_threshold must be positive")
    cap = values["hard_interval_cap"]
    return RoundPolicyParams(
        ema_alpha=min(1.0, float(ema_alpha)),
        stop_conf_threshold=min(1.0, float(stop_conf)),
        stop_trend_min=float(values["stop_trend_min"]),  # type: ignore[arg-type]
        widen_delta_threshold=float(values["widen_delta_threshold"]),  # type: ignore[arg-type]
        max_width=integer("max_width", 1),
        burst_aligned=integer("burst_aligned", 0),
        abandon_patience=integer("abandon_patience", 1),
        hard_interval_cap=None if cap is None else integer("hard_interval_cap", 1),
    )


def default_round_policy_spec() -> ControllerSpec:
    """Confidence-momentum round policy used as the discovery seed."""
    return ControllerSpec(
        kind="round_policy",
        parameters={
            "ema_alpha": 0.3,
            "stop_trend_min": 0.0,
            "widen_delta_threshold": 0.01,
        },
        beta_map=(
            BetaMapEntry("stop_conf_threshold", 0.70, 0.20),
            BetaMapEntry("max_width", 4, 8),
            BetaMapEntry("burst_aligned", 0, 2),
            BetaMapEntry("abandon_patience", 2, 1),
        ),
    )


def builtin_spec(name: str) -> ControllerSpec:
    key = name.replace("-", "_")
    if key == "sc":
        return ControllerSpec("sc", {"width": 64})
    if key == "asc":
        return ControllerSpec("asc", {"threshold": 0.95, "k_min": 2})
    if key == "esc":
        return ControllerSpec("esc", {"chunk_size": 8})
    if key == "parallel_probe":
        return ControllerSpec(
            "parallel_probe",
            {"initial_width": 8, "prune_fraction": 0.25, "stop_threshold": 0.75},
        )
    if key == "round_policy":
        return default_round_policy_spec()
    raise InvalidSpecError(f"invalid-spec: unknown builtin controller {name!r}")


# ---------------------------------------------------------------------------
# Controllers


class BaseController:
    """decide/aggregate pair; default aggregation is the majority rule."""

    hyperparameters: dict[str, object] = {}

    def decide(self, obs: Observation) -> Action:
        raise NotImplementedError

    def aggregate(self, state: ReplayState, pool: TrajectoryPool) -> str:
        return aggregate_majority(state, pool)


def _min_depth_branch(branches: Sequence[BranchView]) -> BranchView:
    return min(branches, key=lambda b: (b.depth, b.branch_id))


class SelfConsistencyController(BaseController):
    """Fixed-width majority voting: open W branches, run all to exhaustion."""

    def __init__(self, width: int) -> None:
        self.width = width
        self.hyperparameters = {"width": width}

    def decide(self, obs: Observation) -> Action:
        target = min(self.width, obs.pool_size)
        if len(obs.branches) < target:
            return Action.branch()
        growing = [b for b in obs.branches if b.active and not b.exhausted]
        if growing:
            return Action.continue_(_min_depth_branch(growing).branch_id)
        return Action.answer()


class AdaptiveConsistencyController(BaseController):
    """Sequential sampling with a modal-frequency stopping rule: grow one
    branch at a time to exhaustion, probe its final answer, and stop once the
    modal final-answer frequency reaches the threshold."""

    def __init__(self, threshold: float = 0.95, k_min: int = 2, max_width: int | None = None) -> None:
        self.threshold = threshold
        self.k_min = k_min
        self.max_width = max_width
        self.hyperparameters = {
            "threshold": threshold,
            "k_min": k_min,
            "max_width": max_width,
        }

    def decide(self, obs: Observation) -> Action:
        limit = min(self.max_width or obs.pool_size, obs.pool_size)
        if not obs.branches:
            return Action.branch()
        current = obs.branches[-1]
        if not current.exhausted:
            return Action.continue_(current.branch_id)
        if not current.probed_at_current_depth():
            return Action.probe(current.branch_id)
        finals = []
        for b in obs.branches:
            latest = b.latest_probe()
            if latest is not None and latest[1] is not None:
                finals.append(latest[1])
        n = len(obs.branches)
        frequency = max(Counter(finals).values()) / n if finals else 0.0
        if n >= self.k_min and frequency >= self.threshold:
            return Action.answer()
        if n < limit:
            return Action.branch()
        return Action.answer()


class ChunkedConsistencyController(BaseController):
    """Chunked early stopping: run chunks of branches to exhaustion and stop
    when the most recent chunk's final answers are unanimous."""

    def __init__(self, chunk_size: int = 8, max_width: int | None = None) -> None:
        self.chunk_size = chunk_size
        self.max_width = max_width
        self.hyperparameters = {"chunk_size": chunk_size, "max_width": max_width}

    def decide(self, obs: Observation) -> Action:
        c = self.chunk_size
        limit = min(self.max_width or obs.pool_size, obs.pool_size)
        m = len(obs.branches)
        if m == 0:
            return Action.branch()
        chunk_target = min(limit, c * math.ceil(m / c))
        if m < chunk_target:
            return Action.branch()
        growing = [b for b in obs.branches if not b.exhausted]
        if growing:
            return Action.continue_(_min_depth_branch(growing).branch_id)
        unprobed = [b for b in obs.branches if not b.probed_at_current_depth()]
        if unprobed:
            return Action.probe(unprobed[0].branch_id)
        window_size = m - c * ((m - 1) // c)
        window = []
        for b in obs.branches[-window_size:]:
            latest = b.latest_probe()
            window.append(latest[1] if latest else None)
        if window and None not in window and len(set(window)) == 1:
            return Action.answer()
        if m < limit:
            return Action.branch()
        return Action.answer()


def _latest_answer(state: ReplayState, branch_id: int) -> str | None:
    depths = [d for (bid, d) in state.revealed if bid == branch_id]
    if not depths:
        return None
    return state.revealed[(branch_id, max(depths))]


def _aggregate_revealed_mode(state: ReplayState, pool: TrajectoryPool) -> str:
    """Mode of the latest revealed answers among active branches, falling back
    to the full-state majority when nothing was revealed."""
    votes: list[tuple[int, str]] = []
    for rec in state.branches:
        if not rec.active:
            continue
        answer = _latest_answer(state, rec.branch_id)
        if answer is not None:
            votes.append((rec.branch_id, answer))
    if not votes:
        return aggregate_majority(state, pool)
    counts = Counter(answer for _, answer in votes)
    top = max(counts.values())
    for _, answer in votes:
        if counts[answer] == top:
            return answer
    raise AssertionError("unreachable")


class _QueuedController(BaseController):
    """Shared machinery for controllers that plan a whole round of atomic
    actions at once. Intents are validated against the live observation when
    popped, so stale ones (an exhausted branch, an already-probed depth) are
    skipped instead of emitted."""

    def __init__(self) -> None:
        self._queue: deque[tuple[str, int | None]] = deque()

    def _intent_to_action(self, intent: tuple[str, int | None], obs: Observation) -> Action | None:
        kind, bid = intent
        if kind == "answer":
            return Action.answer()
        if kind == "branch":
            return Action.branch() if len(obs.branches) < obs.pool_size else None
        assert bid is not None
        view = obs.branch(bid)
        if kind == "continue":
            return Action.continue_(bid) if view.active and not view.exhausted else None
        if kind == "probe":
            if view.active and not view.probed_at_current_depth():
                return Action.probe(bid)
            return None
        if kind == "prune":
            return Action.prune(bid) if view.active else None
        raise AssertionError(f"unknown intent {kind}")


class ParallelProbeController(_QueuedController):
    """Start wide, probe every round, prune branches that disagree with the
    pool mode, and stop once agreement clears the threshold."""

    def __init__(
        self,
        initial_width: int = 8,
        prune_fraction: float = 0.25,
        stop_threshold: float = 0.75,
        min_active: int = 2,
    ) -> None:
        super().__init__()
        self.initial_width = initial_width
        self.prune_fraction = prune_fraction
        self.stop_threshold = stop_threshold
        self.min_active = min_active
        self.hyperparameters = {
            "initial_width": initial_width,
            "prune_fraction": prune_fraction,
            "stop_threshold": stop_threshold,
        }

    def decide(self, obs: Observation) -> Action:
        while True:
            if not self._queue:
                self._compile(obs)
            intent = self._queue.popleft()
            if intent[0] == "evaluate":
                self._evaluate_round(obs)
                continue
            action = self._intent_to_action(intent, obs)
            if action is not None:
                return action

    def _compile(self, obs: Observation) -> None:
        target = min(self.initial_width, obs.pool_size)
        if len(obs.branches) < target:
            self._queue.extend([("branch", None)] * (target - len(obs.branches)))
            return
        active = obs.active_branches()
        if not active:
            self._queue.append(("answer", None))
            return
        for b in active:
            self._queue.append(("probe", b.branch_id))
        self._queue.append(("evaluate", None))

    def _evaluate_round(self, obs: Observation) -> None:
        active = obs.active_branches()
        if not active:
            self._queue.append(("answer", None))
            return
        agreement, mode = pool_confidence(active)
        if agreement >= self.stop_threshold:
            self._queue.append(("answer", None))
            return
        pruned: set[int] = set()
        if mode is not None:
            budget = math.floor(self.prune_fraction * len(active))
            for b in active:
                if len(pruned) >= budget or len(active) - len(pruned) <= self.min_active:
                    break
                latest = b.latest_probe()
                if latest is None or latest[1] != mode:
                    pruned.add(b.branch_id)
                    self._queue.append(("prune", b.branch_id))
        survivors = [b for b in active if b.branch_id not in pruned]
        growable = [b for b in survivors if not b.exhausted]
        if not growable:
            self._queue.append(("answer", None))
            return
        for b in growable:
            self._queue.append(("continue", b.branch_id))

    def aggregate(self, state: ReplayState, pool: TrajectoryPool) -> str:
        return _aggregate_revealed_mode(state, pool)


class RoundPolicyController(_QueuedController):
    """Round-based policy with EMA-trend stopping, stagnation-triggered
    widening, burst depth for branches aligned with the pool mode, and
    patience-based pruning that never drops below ``min_active`` branches.

    Each round every active, non-exhausted branch advances one interval and
    is probed at its new depth; aligned branches receive ``burst_aligned``
    extra advance+probe steps. At round end the pool confidence updates an
    EMA; the episode answers when the EMA is high with a non-negative trend,
    widens by one branch when the trend stagnates, and prunes branches that
    stayed misaligned for ``abandon_patience`` consecutive rounds.
    """

    def __init__(self, params: RoundPolicyParams) -> None:
        super().__init__()
        self.params = params
        self.hyperparameters = {
            "ema_alpha": params.ema_alpha,
            "stop_conf_threshold": params.stop_conf_threshold,
            "stop_trend_min": params.stop_trend_min,
            "widen_delta_threshold": params.widen_delta_threshold,
            "max_width": params.max_width,
            "burst_aligned": params.burst_aligned,
            "abandon_patience": params.abandon_patience,
            "hard_interval_cap": params.hard_interval_cap,
            "min_active": params.min_active,
        }
        self._ema = 0.0
        self._patience: dict[int, int] = {}

    def _cap_reached(self, obs: Observation) -> bool:
        cap = self.params.hard_interval_cap
        return cap is not None and obs.intervals_used >= cap

    def decide(self, obs: Observation) -> Action:
        while True:
            if not self._queue:
                self._compile_round(obs)
            intent = self._queue.popleft()
            if intent[0] == "round_end":
                self._round_end(obs)
                continue
            action = self._intent_to_action(intent, obs)
            if action is None:
                continue
            if action.kind in (ActionKind.CONTINUE, ActionKind.BRANCH) and self._cap_reached(obs):
                self._queue.clear()
                return Action.answer()
            return action

    def _compile_round(self, obs: Observation) -> None:
        if len(obs.branches) == 0:
            boot = min(max(self.params.min_active, 1), obs.pool_size)
            self._queue.extend([("branch", None)] * boot)
            return
        active = obs.active_branches()
        if not active or self._cap_reached(obs):
            self._queue.append(("answer", None))
            return
        mode = pool_mode(active)
        for b in active:
            steps = 1
            latest = b.latest_probe()
            if mode is not None and latest is not None and latest[1] == mode:
                steps += self.params.burst_aligned
            for _ in range(steps):
                self._queue.append(("continue", b.branch_id))
                self._queue.append(("probe", b.branch_id))
        self._queue.append(("round_end", None))

    def _round_end(self, obs: Observation) -> None:
        active = obs.active_branches()
        if not active:
            self._queue.append(("answer", None))
            return
        confidence, mode = pool_confidence(active)
        previous = self._ema
        self._ema = self.params.ema_alpha * confidence + (1 - self.params.ema_alpha) * previous
        delta = self._ema - previous
        if self._ema >= self.params.stop_conf_threshold and delta >= self.params.stop_trend_min:
            self._queue.append(("answer", None))
            return
        width_limit = min(self.params.max_width, obs.pool_size)
        widen = (
            delta < self.params.widen_delta_threshold
            and len(obs.branches) < width_limit
            and not self._cap_reached(obs)
        )
        if widen:
            self._queue.append(("branch", None))
        if mode is not None:
            for b in active:
                latest = b.latest_probe()
                if latest is None:
                    continue
                if latest[1] == mode:
                    self._patience[b.branch_id] = 0
                else:
                    self._patience[b.branch_id] = self._patience.get(b.branch_id, 0) + 1
        remaining = len(active) + (1 if widen else 0)
        for b in active:
            if remaining <= self.params.min_active:
                break
            if self._patience.get(b.branch_id, 0) >= self.params.abandon_patience:
                self._queue.append(("prune", b.branch_id))
                remaining -= 1
        if not widen and all(b.exhausted for b in active):
            self._queue.append(("answer", None))

    def aggregate(self, state: ReplayState, pool: TrajectoryPool) -> str:
        return _aggregate_revealed_mode(state, pool)


# ---------------------------------------------------------------------------
# Instantiation and validation


def _param(spec: ControllerSpec, name: str, default: object) -> object:
    return spec.parameters.get(name, default)


def _check_known(spec: ControllerSpec, known: set[str]) -> None:
    for key in spec.parameters:
        if key not in known:
            raise InvalidSpecError(
                f"invalid-spec: unknown parameter {key!r} for kind {spec.kind!r}"
            )


def instantiate(spec: ControllerSpec, beta: float) -> BaseController:
    """Build a fresh per-episode controller from a spec at one beta value."""
    if not math.isfinite(beta) or beta < 0:
        raise InvalidSpecError(f"invalid-spec: beta must be a nonnegative real, got {beta!r}")
    if spec.kind not in KINDS:
        raise InvalidSpecError(f"invalid-spec: unknown controller kind {spec.kind!r}")
    if spec.kind != "round_policy" and spec.beta_map:
        raise InvalidSpecError("invalid-spec: beta_map is only defined for round_policy")

    if spec.kind == "sc":
        _check_known(spec, {"width"})
        width = int(_param(spec, "width", 64))  # type: ignore[arg-type]
        if width < 1:
            raise InvalidSpecError("invalid-spec: sc width must be >= 1")
        return SelfConsistencyController(width)

    if spec.kind == "asc":
        _check_known(spec, {"threshold", "k_min", "max_width"})
        threshold = float(_param(spec, "threshold", 0.95))  # type: ignore[arg-type]
        k_min = int(_param(spec, "k_min", 2))  # type: ignore[arg-type]
        raw_max = _param(spec, "max_width", None)
        max_width = None if raw_max is None else int(raw_max)  # type: ignore[arg-type]
        if threshold <= 0 or k_min < 1 or (max_width is not None and max_width < 1):
            raise InvalidSpecError("invalid-spec: bad asc parameters")
        return AdaptiveConsistencyController(threshold, k_min, max_width)

    if spec.kind == "esc":
        _check_known(spec, {"chunk_size", "max_width"})
        chunk = int(_param(spec, "chunk_size", 8))  # type: ignore[arg-type]
        raw_max = _param(spec, "max_width", None)
        max_width = None if raw_max is None else int(raw_max)  # type: ignore[arg-type]
        if chunk < 1 or (max_width is not None and max_width < 1):
            raise InvalidSpecError("invalid-spec: bad esc parameters")
        return ChunkedConsistencyController(chunk, max_width)

    if spec.kind == "parallel_probe":
        _check_known(spec, {"initial_width", "prune_fraction", "stop_threshold"})
        width = int(_param(spec, "initial_width", 8))  # type: ignore[arg-type]
        fraction = float(_param(spec, "prune_fraction", 0.25))  # type: ignore[arg-type]
        threshold = float(_param(spec, "stop_threshold", 0.75))  # type: ignore[arg-type]
        if width < 1 or not 0.0 <= fraction <= 1.0 or threshold <= 0:
            raise InvalidSpecError("invalid-spec: bad parallel_probe parameters")
        return ParallelProbeController(width, fraction, threshold)

    params = resolve_round_policy(spec, beta)
    return RoundPolicyController(params)


_VALIDATION_BETAS = (0.0, 0.25, 0.5, 0.75, 1.0)


def validate_spec(spec: ControllerSpec) -> None:
    """Reject specs that cannot be instantiated across the usual beta range."""
    for beta in _VALIDATION_BETAS:
        instantiate(spec, beta)
