"""Exception types shared across the package."""

from __future__ import annotations


class ReplayError(Exception):
    """Base class for all package errors."""


class EpisodeFinishedError(ReplayError):
    """Operation requires a live episode, but the state is terminated."""


class InadmissibleActionError(ReplayError):
    """An action was applied outside the admissible set."""

    def __init__(self, action: object, reason: str) -> None:
        super().__init__(f"inadmissible-action: {action}: {reason}")
        self.action = action
        self.reason = reason


class AggregationError(ReplayError):
    """No usable vote exists in the state ("no-aggregable-answer")."""


class PoolFormatError(ReplayError):
    """Dataset file failed to parse; message carries the line locus."""


class InvalidPoolError(ReplayError):
    """A parsed pool violates a structural invariant."""


class InvalidSpecError(ReplayError):
    """A controller spec cannot be validated or instantiated."""


class TraceCorruptError(ReplayError):
    """A recorded trace diverges from replay; carries the first bad step."""

    def __init__(self, step: int, detail: str) -> None:
        super().__init__(f"trace-corrupt at step {step}: {detail}")
        self.step = step


class ExplorerUnavailableError(ReplayError):
    """The external explorer process died or stopped responding."""


class NoRoundsError(ReplayError):
    """Discovery was configured with zero rounds ("no-rounds")."""


class NoCandidateError(ReplayError):
    """Every discovery round failed; nothing to select ("no-candidate")."""
