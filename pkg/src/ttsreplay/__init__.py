"""Deterministic replay engine and discovery harness for width-depth
inference-budget controllers over pre-collected trajectory pools."""

__version__ = "0.1.0"

from .controllers import (
    BetaMapEntry,
    ControllerSpec,
    Observation,
    RoundPolicyParams,
    builtin_spec,
    default_round_policy_spec,
    instantiate,
    observe,
    validate_spec,
)
from .discovery import (
    DiscoveryConfig,
    DiscoveryResult,
    HistoryEntry,
    run_discovery,
    scripted_mutation_explorer,
    select_controller,
)
from .evaluation import (
    CurvePoint,
    EpisodeResult,
    EvalConfig,
    evaluate,
    run_episode,
    sweep,
)
from .replay_core import (
    Action,
    ActionKind,
    BranchRecord,
    CostModel,
    ReplayState,
    RevealedProbe,
    admissible_actions,
    aggregate_majority,
    apply_action,
    cost_of,
    initial_state,
    is_admissible,
    token_cost_of,
)
from .tracing import EpisodeTrace, TraceDigest, TraceEvent, digest, replay_trace
from .trajectory_data import (
    Interval,
    SyntheticGenConfig,
    Trajectory,
    TrajectoryPool,
    generate_synthetic,
    load_pools,
    save_pools,
    subsample_permutation,
)
