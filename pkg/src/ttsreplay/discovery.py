"""Multi-round controller discovery against a pluggable explorer.

Each round the driver serializes the accumulated history (specs, scaling
curves, execution digests), asks the explorer for one improved controller
spec, validates it, sweeps it over the search pools, and appends the outcome.
After the final round the candidate with the best search-set accuracy wins,
with ties broken by lower token cost and then earlier round.

The explorer is either an in-process callable (the scripted mutation
explorer, used for tests and offline runs) or an external process speaking
one JSON line per request/response over its standard streams:

  request   {"type": "propose", "round": N, "prompt": "...", "history": [...]}
  response  {"type": "proposal", "spec": {...}, "commentary": "..."}

Held-out pools are never part of any payload sent to the explorer.
"""

from __future__ import annotations

import json
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .controllers import ControllerSpec, default_round_policy_spec, validate_spec
from .errors import (
    ExplorerUnavailableError,
    InvalidSpecError,
    NoCandidateError,
    NoRoundsError,
    ReplayError,
)
from .evaluation import CurvePoint, EvalConfig, ScalingCurve, sweep
from .tracing import QuestionDigestSummary, digest_means
from .trajectory_data import TrajectoryPool

DEFAULT_PROMPT = (
    "You are designing a budget controller for replayed multi-branch reasoning. "
    "Controllers act on pools of pre-collected trajectories through five atomic "
    "actions (branch, continue, probe, prune, answer) and must expose a single "
    "scalar knob beta: every internal threshold derives from beta through the "
    "declared map, and larger beta must always mean a larger compute budget. "
    "Respond with exactly one JSON line of the form "
    '{"type": "proposal", "spec": {...}, "commentary": "..."}. The spec must use '
    'kind "round_policy" with a "parameters" object and a "beta_map" array of '
    '{"name", "base", "coefficient"} entries, coefficient >= 0. Study the '
    "history entries (scaling curves plus per-question execution digests) to "
    "diagnose where earlier controllers overspent or stopped too early, then "
    "propose one improved controller."
)


@dataclass(frozen=True)
class HistoryEntry:
    round_index: int
    spec: ControllerSpec | None
    curve: ScalingCurve
    digests: tuple[tuple[float, tuple[QuestionDigestSummary, ...]], ...]
    commentary: str = ""
    failed: bool = False
    failure_reason: str = ""

    def to_payload(self) -> dict:
        return {
            "round": self.round_index,
            "spec": None if self.spec is None else self.spec.to_dict(),
            "curve": [
                {
                    "beta": p.beta,
                    "accuracy": p.accuracy,
                    "mean_intervals": p.mean_intervals,
                    "mean_tokens": p.mean_tokens,
                    "objective": p.objective,
                }
                for p in self.curve
            ],
            "digests": [
                {"beta": beta, "questions": [q.to_dict() for q in questions]}
                for beta, questions in self.digests
            ],
            "commentary": self.commentary,
            "failed": self.failed,
            "failure_reason": self.failure_reason,
        }


@dataclass(frozen=True)
class DiscoveryConfig:
    search_pools: tuple[TrajectoryPool, ...]
    eval_pools: tuple[TrajectoryPool, ...]
    eval: EvalConfig
    rounds: int = 5
    explorer_command: tuple[str, ...] | None = None
    explorer_seed: int = 0
    selection_grid: tuple[float, ...] | None = None
    prompt: str = DEFAULT_PROMPT


@dataclass(frozen=True)
class DiscoveryResult:
    spec: ControllerSpec
    beta: float
    round_index: int
    accuracy: float
    mean_tokens: float
    history: tuple[HistoryEntry, ...]
    request_lines: tuple[str, ...]


# ---------------------------------------------------------------------------
# Explorers


class InProcessExplorer:
    """Adapter giving a plain callable the same line-level surface as a
    subprocess explorer, so requests are serialized (and auditable) either way."""

    def __init__(self, propose_fn: Callable[[Mapping], Mapping]) -> None:
        self._fn = propose_fn

    def propose(self, request_line: str) -> str:
        request = json.loads(request_line)
        return json.dumps(self._fn(request))

    def close(self) -> None:
        pass


class SubprocessExplorer:
    """One long-lived explorer process; one request line, one response line."""

    def __init__(self, command: Sequence[str]) -> None:
        try:
            self._proc = subprocess.Popen(
                list(command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ExplorerUnavailableError(f"explorer-unavailable: {exc}") from exc

    def propose(self, request_line: str) -> str:
        proc = self._proc
        if proc.poll() is not None:
            raise ExplorerUnavailableError("explorer-unavailable: process exited")
        assert proc.stdin is not None and proc.stdout is not None
        try:
            proc.stdin.write(request_line + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ExplorerUnavailableError(f"explorer-unavailable: {exc}") from exc
        response = proc.stdout.readline()
        if not response:
            raise ExplorerUnavailableError("explorer-unavailable: response stream closed")
        return response.strip()

    def close(self) -> None:
        proc = self._proc
        if proc.stdin is not None:
            try:
                proc.stdin.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()


# ---------------------------------------------------------------------------
# Scripted mutation explorer (deterministic in-process stand-in)

# Each rule changes exactly one hyperparameter of the best spec so far:
# either a parameters constant ("param") or a beta_map base ("base").


def _nudge_widen_up(v: float) -> float:
    return v * 5.0 if v > 0 else 0.05


def _nudge_stop_down(v: float) -> float:
    return v * 0.9


def _nudge_width_up(v: float) -> float:
    return v + 4


def _nudge_burst_up(v: float) -> float:
    return v + 1


def _nudge_stop_up(v: float) -> float:
    return v * 1.1


def _nudge_patience(v: float) -> float:
    return v + 1 if v <= 1 else v - 1


def _nudge_alpha(v: float) -> float:
    return v * 1.5 if v * 1.5 <= 1.0 else v * 0.75


def _nudge_widen_down(v: float) -> float:
    return v * 0.5 if v > 0 else -0.01


_MUTATION_SCHEDULE: tuple[tuple[str, str, Callable[[float], float]], ...] = (
    ("widen_delta_threshold", "param", _nudge_widen_up),
    ("stop_conf_threshold", "base", _nudge_stop_down),
    ("max_width", "base", _nudge_width_up),
    ("burst_aligned", "base", _nudge_burst_up),
    ("stop_conf_threshold", "base", _nudge_stop_up),
    ("abandon_patience", "base", _nudge_patience),
    ("ema_alpha", "param", _nudge_alpha),
    ("widen_delta_threshold", "param", _nudge_widen_down),
)

_PARAM_FALLBACKS = {
    "widen_delta_threshold": 0.01,
    "ema_alpha": 0.3,
    "stop_trend_min": 0.0,
}


def _entry_best_point(entry: Mapping) -> tuple[float, float]:
    """(accuracy, mean_tokens) of the entry's best curve point."""
    best_acc, best_tokens = -1.0, float("inf")
    for point in entry.get("curve", ()):
        acc, tokens = point["accuracy"], point["mean_tokens"]
        if acc > best_acc or (acc == best_acc and tokens < best_tokens):
            best_acc, best_tokens = acc, tokens
    return best_acc, best_tokens


def _best_payload_entry(entries: Sequence[Mapping]) -> Mapping:
    best = entries[0]
    best_acc, best_tokens = _entry_best_point(best)
    for entry in entries[1:]:
        acc, tokens = _entry_best_point(entry)
        if acc > best_acc or (acc == best_acc and tokens < best_tokens):
            best, best_acc, best_tokens = entry, acc, tokens
    return best


def _apply_mutation(
    spec: ControllerSpec, rule: tuple[str, str, Callable[[float], float]]
) -> ControllerSpec:
    name, where, op = rule
    if where == "base":
        entries = list(spec.beta_map)
        for i, entry in enumerate(entries):
            if entry.name == name:
                mutated = type(entry)(entry.name, op(entry.base), entry.coefficient)
                entries[i] = mutated
                return ControllerSpec(spec.kind, dict(spec.parameters), tuple(entries))
        where = "param"  # target not beta-mapped on this spec; fall through
    params = dict(spec.parameters)
    current = float(params.get(name, _PARAM_FALLBACKS.get(name, 0.0)))  # type: ignore[arg-type]
    params[name] = op(current)
    return ControllerSpec(spec.kind, params, spec.beta_map)


def scripted_mutation_explorer(history: Sequence[Mapping], seed: int = 0) -> ControllerSpec:
    """Round 1 proposes the default round policy; later rounds perturb one
    hyperparameter of the best entry so far, cycling a fixed schedule."""
    successful = [e for e in history if not e.get("failed") and e.get("spec")]
    if not successful:
        return default_round_policy_spec()
    base = ControllerSpec.from_dict(_best_payload_entry(successful)["spec"])
    rule = _MUTATION_SCHEDULE[(seed + len(history) - 1) % len(_MUTATION_SCHEDULE)]
    return _apply_mutation(base, rule)


class ScriptedMutationExplorer:
    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def __call__(self, request: Mapping) -> dict:
        spec = scripted_mutation_explorer(request.get("history", ()), self.seed)
        return {
            "type": "proposal",
            "spec": spec.to_dict(),
            "commentary": f"scripted proposal for round {request.get('round')}",
        }


# ---------------------------------------------------------------------------
# Driver


def _parse_proposal(response_line: str) -> tuple[ControllerSpec, str]:
    try:
        record = json.loads(response_line)
    except json.JSONDecodeError as exc:
        raise InvalidSpecError(f"invalid-spec: unparseable proposal line: {exc}") from exc
    if not isinstance(record, dict) or record.get("type") != "proposal":
        raise InvalidSpecError(f"invalid-spec: expected a proposal record, got {record!r}")
    spec = ControllerSpec.from_dict(record.get("spec") or {})
    if spec.kind != "round_policy":
        raise InvalidSpecError("invalid-spec: proposals must stay in the round_policy family")
    validate_spec(spec)
    return spec, str(record.get("commentary", ""))


def select_controller(
    history: Sequence[HistoryEntry],
    selection_grid: Sequence[float] | None = None,
) -> tuple[HistoryEntry, CurvePoint]:
    """Argmax of search-set accuracy over (round, beta); ties prefer lower
    mean token cost, then the earlier round."""
    grid = None if selection_grid is None else set(selection_grid)
    best: tuple[HistoryEntry, CurvePoint] | None = None
    for entry in history:
        if entry.failed or entry.spec is None:
            continue
        for point in entry.curve:
            if grid is not None and point.beta not in grid:
                continue
            if best is None:
                best = (entry, point)
                continue
            incumbent = best[1]
            if point.accuracy > incumbent.accuracy or (
                point.accuracy == incumbent.accuracy
                and point.mean_tokens < incumbent.mean_tokens
            ):
                best = (entry, point)
    if best is None:
        raise NoCandidateError("no-candidate: every discovery round failed")
    return best


def history_to_document(
    config: DiscoveryConfig,
    history: Sequence[HistoryEntry],
    selection: tuple[HistoryEntry, CurvePoint] | None,
) -> dict:
    doc = {
        "config": {
            "rounds": config.rounds,
            "search_questions": [p.question_id for p in config.search_pools],
            "eval_questions": [p.question_id for p in config.eval_pools],
            "repeats": config.eval.repeats,
            "seed": config.eval.seed,
            "gamma": config.eval.gamma,
            "beta_grid": list(config.eval.beta_grid),
            "explorer_command": None
            if config.explorer_command is None
            else list(config.explorer_command),
            "explorer_seed": config.explorer_seed,
        },
        "entries": [e.to_payload() for e in history],
        "selection": None,
    }
    if selection is not None:
        entry, point = selection
        assert entry.spec is not None
        doc["selection"] = {
            "round": entry.round_index,
            "beta": point.beta,
            "spec": entry.spec.to_dict(),
            "accuracy": point.accuracy,
            "mean_intervals": point.mean_intervals,
            "mean_tokens": point.mean_tokens,
        }
    return doc


def _persist(path: str | Path | None, document: dict) -> None:
    if path is None:
        return
    Path(path).write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def run_discovery(
    config: DiscoveryConfig,
    history_out: str | Path | None = None,
) -> DiscoveryResult:
    """Run the propose/evaluate/record loop and select the final controller.

    An invalid proposal is retried once, then the round is recorded as failed
    and skipped. Explorer process failure aborts with the partial history
    persisted (when ``history_out`` is given).
    """
    if config.rounds < 1:
        raise NoRoundsError("no-rounds: discovery needs at least one round")
    search_ids = {p.question_id for p in config.search_pools}
    eval_ids = {p.question_id for p in config.eval_pools}
    if search_ids & eval_ids:
        raise ValueError(f"search and eval sets overlap: {sorted(search_ids & eval_ids)}")
    if not config.search_pools:
        raise ValueError("discovery requires a nonempty search set")

    if config.explorer_command is None:
        explorer: InProcessExplorer | SubprocessExplorer = InProcessExplorer(
            ScriptedMutationExplorer(config.explorer_seed)
        )
    else:
        explorer = SubprocessExplorer(config.explorer_command)

    history: list[HistoryEntry] = []
    request_lines: list[str] = []
    try:
        for round_index in range(1, config.rounds + 1):
            request = {
                "type": "propose",
                "round": round_index,
                "prompt": config.prompt,
                "history": [e.to_payload() for e in history],
            }
            request_line = json.dumps(request)

            spec: ControllerSpec | None = None
            commentary = ""
            failure = ""
            for _ in range(2):  # one retry on an invalid proposal
                request_lines.append(request_line)
                try:
                    spec, commentary = _parse_proposal(explorer.propose(request_line))
                    break
                except InvalidSpecError as exc:
                    failure = str(exc)
                    spec = None
            if spec is None:
                history.append(
                    HistoryEntry(
                        round_index=round_index,
                        spec=None,
                        curve=(),
                        digests=(),
                        failed=True,
                        failure_reason=failure,
                    )
                )
                continue

            try:
                result = sweep(spec, config.search_pools, config.eval)
            except ReplayError as exc:
                history.append(
                    HistoryEntry(
                        round_index=round_index,
                        spec=spec,
                        curve=(),
                        digests=(),
                        commentary=commentary,
                        failed=True,
                        failure_reason=f"sweep failed: {exc}",
                    )
                )
                continue
            digests = tuple(
                (beta, tuple(digest_means(list(ev.digests))))
                for beta, ev in zip(config.eval.beta_grid, result.evals)
            )
            history.append(
                HistoryEntry(
                    round_index=round_index,
                    spec=spec,
                    curve=result.points,
                    digests=digests,
                    commentary=commentary,
                )
            )
    except ExplorerUnavailableError:
        _persist(history_out, history_to_document(config, history, None))
        raise
    finally:
        explorer.close()

    selection = select_controller(history, config.selection_grid)
    _persist(history_out, history_to_document(config, history, selection))
    entry, point = selection
    assert entry.spec is not None
    return DiscoveryResult(
        spec=entry.spec,
        beta=point.beta,
        round_index=entry.round_index,
        accuracy=point.accuracy,
        mean_tokens=point.mean_tokens,
        history=tuple(history),
        request_lines=tuple(request_lines),
    )
