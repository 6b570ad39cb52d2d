"""Per-step execution traces, replay validation, and compact digests.

A trace records every decision an episode took, with enough state summary
per step to reconstruct and verify the terminal state by re-applying the
actions through the replay core. Digests compress one episode into the
counts a discovery loop wants to read.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    EpisodeFinishedError,
    InadmissibleActionError,
    TraceCorruptError,
)
from .replay_core import (
    Action,
    ActionKind,
    CostModel,
    ReplayState,
    action_from_dict,
    action_to_dict,
    apply_action,
    cost_of,
    initial_state,
)
from .trajectory_data import TrajectoryPool


@dataclass(frozen=True)
class TraceEvent:
    step: int
    action: Action
    active_after: int
    depths_after: tuple[int, ...]
    revealed_after: int
    cost_after: float


@dataclass(frozen=True)
class EpisodeTrace:
    question_id: str
    repeat_index: int
    spec_digest: str
    beta: float
    permutation: tuple[int, ...]
    kappa_probe: float
    events: tuple[TraceEvent, ...]
    forced_answer: bool
    final_answer: str | None
    final_agreement: float


def replay_trace(trace: EpisodeTrace, pool: TrajectoryPool) -> ReplayState:
    """Re-apply the logged actions and verify every step summary.

    Returns the reconstructed terminal state; raises TraceCorruptError naming
    the first divergent step.
    """
    if trace.question_id != pool.question_id:
        raise TraceCorruptError(-1, f"trace is for question {trace.question_id!r}, not the pool's")
    model = CostModel(kappa_probe=trace.kappa_probe)
    state = initial_state(pool.question_id)
    for index, event in enumerate(trace.events):
        if event.step != index:
            raise TraceCorruptError(index, f"expected step {index}, found {event.step}")
        try:
            state = apply_action(state, event.action, pool, trace.permutation)
        except (InadmissibleActionError, EpisodeFinishedError) as exc:
            raise TraceCorruptError(index, str(exc)) from exc
        depths = tuple(b.depth for b in state.branches)
        active = len(state.active_ids)
        if depths != event.depths_after:
            raise TraceCorruptError(index, f"depths {depths} != logged {event.depths_after}")
        if active != event.active_after:
            raise TraceCorruptError(index, f"active {active} != logged {event.active_after}")
        if state.probes_taken != event.revealed_after:
            raise TraceCorruptError(
                index, f"revealed {state.probes_taken} != logged {event.revealed_after}"
            )
        cost = cost_of(state, model)
        if abs(cost - event.cost_after) > 1e-12:
            raise TraceCorruptError(index, f"cost {cost} != logged {event.cost_after}")
    return state


@dataclass(frozen=True)
class TraceDigest:
    question_id: str
    repeat_index: int
    branches_opened: int
    prunes: int
    probes: int
    max_depth: int
    stop_step: int
    forced_answer: bool
    final_agreement: float


def digest_trace(trace: EpisodeTrace) -> TraceDigest:
    counts = {kind: 0 for kind in ActionKind}
    max_depth = 0
    for event in trace.events:
        counts[event.action.kind] += 1
        if event.depths_after:
            max_depth = max(max_depth, max(event.depths_after))
    return TraceDigest(
        question_id=trace.question_id,
        repeat_index=trace.repeat_index,
        branches_opened=counts[ActionKind.BRANCH],
        prunes=counts[ActionKind.PRUNE],
        probes=counts[ActionKind.PROBE],
        max_depth=max_depth,
        stop_step=len(trace.events) - 1,
        forced_answer=trace.forced_answer,
        final_agreement=trace.final_agreement,
    )


def digest(traces: Sequence[EpisodeTrace]) -> list[TraceDigest]:
    """One digest per recorded episode, in input order."""
    if not traces:
        raise ValueError("digest requires at least one trace")
    return [digest_trace(t) for t in traces]


@dataclass(frozen=True)
class QuestionDigestSummary:
    question_id: str
    episodes: int
    mean_branches: float
    mean_prunes: float
    mean_probes: float
    mean_max_depth: float
    mean_stop_step: float
    forced_rate: float
    mean_final_agreement: float

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "episodes": self.episodes,
            "mean_branches": self.mean_branches,
            "mean_prunes": self.mean_prunes,
            "mean_probes": self.mean_probes,
            "mean_max_depth": self.mean_max_depth,
            "mean_stop_step": self.mean_stop_step,
            "forced_rate": self.forced_rate,
            "mean_final_agreement": self.mean_final_agreement,
        }


def digest_means(digests: Sequence[TraceDigest]) -> list[QuestionDigestSummary]:
    """Per-question means over episode digests, ordered by first appearance."""
    grouped: dict[str, list[TraceDigest]] = {}
    for d in digests:
        grouped.setdefault(d.question_id, []).append(d)
    out = []
    for qid, items in grouped.items():
        n = len(items)
        out.append(
            QuestionDigestSummary(
                question_id=qid,
                episodes=n,
                mean_branches=sum(d.branches_opened for d in items) / n,
                mean_prunes=sum(d.prunes for d in items) / n,
                mean_probes=sum(d.probes for d in items) / n,
                mean_max_depth=sum(d.max_depth for d in items) / n,
                mean_stop_step=sum(d.stop_step for d in items) / n,
                forced_rate=sum(1 for d in items if d.forced_answer) / n,
                mean_final_agreement=sum(d.final_agreement for d in items) / n,
            )
        )
    return out


# ---------------------------------------------------------------------------
# Trace files: line-delimited, one episode header then one record per event


def write_traces(path: str | Path, traces: Iterable[EpisodeTrace]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for trace in traces:
            header = {
                "type": "episode",
                "question_id": trace.question_id,
                "repeat": trace.repeat_index,
                "spec_digest": trace.spec_digest,
                "beta": trace.beta,
                "permutation": list(trace.permutation),
                "kappa_probe": trace.kappa_probe,
                "forced_answer": trace.forced_answer,
                "final_answer": trace.final_answer,
                "final_agreement": trace.final_agreement,
            }
            fh.write(json.dumps(header) + "\n")
            for event in trace.events:
                record = {
                    "type": "event",
                    "t": event.step,
                    "action": action_to_dict(event.action),
                    "active": event.active_after,
                    "depths": list(event.depths_after),
                    "revealed": event.revealed_after,
                    "cost": event.cost_after,
                }
                fh.write(json.dumps(record) + "\n")


def read_traces(path: str | Path) -> list[EpisodeTrace]:
    traces: list[EpisodeTrace] = []
    header: dict | None = None
    events: list[TraceEvent] = []

    def flush() -> None:
        nonlocal header, events
        if header is None:
            return
        traces.append(
            EpisodeTrace(
                question_id=header["question_id"],
                repeat_index=header["repeat"],
                spec_digest=header["spec_digest"],
                beta=header["beta"],
                permutation=tuple(header["permutation"]),
                kappa_probe=header["kappa_probe"],
                events=tuple(events),
                forced_answer=header["forced_answer"],
                final_answer=header["final_answer"],
                final_agreement=header["final_agreement"],
            )
        )
        header, events = None, []

    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceCorruptError(ln, f"unparseable trace line: {exc}") from exc
            if record.get("type") == "episode":
                flush()
                header = record
            elif record.get("type") == "event":
                if header is None:
                    raise TraceCorruptError(ln, "event record before any episode header")
                events.append(
                    TraceEvent(
                        step=record["t"],
                        action=action_from_dict(record["action"]),
                        active_after=record["active"],
                        depths_after=tuple(record["depths"]),
                        revealed_after=record["revealed"],
                        cost_after=record["cost"],
                    )
                )
            else:
                raise TraceCorruptError(ln, f"unknown record type {record.get('type')!r}")
    flush()
    return traces
