"""Command-line front end for the replay and discovery pipeline.

Subcommands: gen-synth, validate, eval, sweep, discover, trace. Every run
writes a reproduction manifest before any computed output. Exit codes: 0 on
success, 1 on usage errors, 2 on data errors.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import shlex
import sys
from pathlib import Path
from typing import Sequence

import numpy

from . import __version__
from .controllers import ControllerSpec, builtin_spec, validate_spec
from .discovery import DEFAULT_PROMPT, DiscoveryConfig, run_discovery
from .errors import ReplayError
from .evaluation import (
    CurvePoint,
    EvalConfig,
    curve_to_csv,
    episodes_to_csv,
    evaluate,
    sweep,
)
from .replay_core import CostModel
from .tracing import digest, digest_means, read_traces, write_traces
from .trajectory_data import (
    SyntheticGenConfig,
    generate_synthetic,
    load_pools,
    save_pools,
)

DATA_DIR_ENV = "TTSREPLAY_DATA_DIR"

_BUILTIN_SPECS = ("sc", "asc", "esc", "parallel-probe", "parallel_probe", "round-policy", "round_policy")


class _UsageError(Exception):
    def __init__(self, parser: argparse.ArgumentParser, message: str) -> None:
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(self, message)


def _resolve_path(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    base = os.environ.get(DATA_DIR_ENV)
    if base and not p.is_absolute():
        candidate = Path(base) / p
        if candidate.exists():
            return candidate
    return p


def _load_all_pools(paths: Sequence[str]):
    pools = []
    for path in paths:
        pools.extend(load_pools(_resolve_path(path)))
    return pools


def _parse_param(raw: str) -> tuple[str, object]:
    if "=" not in raw:
        raise ReplayError(f"invalid-spec: --param expects KEY=VALUE, got {raw!r}")
    key, value = raw.split("=", 1)
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value


def _load_spec(value: str, params: Sequence[str] | None) -> ControllerSpec:
    if value in _BUILTIN_SPECS:
        spec = builtin_spec(value)
    else:
        path = _resolve_path(value)
        try:
            record = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ReplayError(f"invalid-spec: cannot read spec file {value!r}: {exc}") from exc
        spec = ControllerSpec.from_dict(record)
    if params:
        merged = dict(spec.parameters)
        for raw in params:
            key, parsed = _parse_param(raw)
            merged[key] = parsed
        spec = ControllerSpec(spec.kind, merged, spec.beta_map)
    validate_spec(spec)
    return spec


def _write_manifest(args: argparse.Namespace, resolved: dict, outputs: list[str]) -> None:
    """Reproduction manifest, written before any computation output."""
    manifest = {
        "command": args.command,
        "config": resolved,
        "seed": resolved.get("seed"),
        "versions": {
            "ttsreplay": __version__,
            "python": platform.python_version(),
            "numpy": numpy.__version__,
        },
        "outputs": outputs,
    }
    path = getattr(args, "manifest", None) or f"{args.command}.manifest.json"
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _emit(text: str, out: str | None) -> None:
    sys.stdout.write(text)
    if out:
        Path(out).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_gen_synth(args: argparse.Namespace) -> int:
    weights = tuple(float(w) for w in args.stabilize_weights.split(","))
    config = SyntheticGenConfig(
        question_count=args.questions,
        pool_size=args.pool_size,
        max_depth=args.max_depth,
        correct_rate=args.correct_rate,
        stabilize_depth_distribution=weights,
        pre_stabilization_noise=args.noise_answers,
        delta_tokens=args.delta,
        seed=args.seed,
    )
    resolved = {
        "questions": args.questions,
        "pool_size": args.pool_size,
        "max_depth": args.max_depth,
        "correct_rate": args.correct_rate,
        "stabilize_weights": list(weights),
        "noise_answers": args.noise_answers,
        "delta": args.delta,
        "seed": args.seed,
        "out": args.out,
    }
    _write_manifest(args, resolved, [args.out])
    pools = generate_synthetic(config)
    save_pools(args.out, pools)
    sys.stdout.write(f"wrote {len(pools)} pools to {args.out}\n")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    _write_manifest(args, {"pools": list(args.pools)}, [])
    lines = ["question_id,trajectories,max_depth,delta_tokens"]
    for path in args.pools:
        for pool in load_pools(_resolve_path(path)):
            lines.append(f"{pool.question_id},{pool.size},{pool.max_depth},{pool.delta_tokens}")
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _eval_config(args: argparse.Namespace, grid: tuple[float, ...]) -> EvalConfig:
    return EvalConfig(
        repeats=args.repeats,
        seed=args.seed,
        gamma=args.gamma,
        beta_grid=grid,
        cost_model=CostModel(kappa_probe=args.kappa_probe),
        workers=args.workers,
    )


def _cmd_eval(args: argparse.Namespace) -> int:
    spec = _load_spec(args.spec, args.param)
    resolved = {
        "spec": spec.to_dict(),
        "beta": args.beta,
        "pools": list(args.pools),
        "repeats": args.repeats,
        "seed": args.seed,
        "gamma": args.gamma,
        "kappa_probe": args.kappa_probe,
        "workers": args.workers,
    }
    outputs = [p for p in (args.out, args.episodes_out, args.traces_out) if p]
    _write_manifest(args, resolved, outputs)
    pools = _load_all_pools(args.pools)
    config = _eval_config(args, (args.beta,))
    result = evaluate(spec, args.beta, pools, config)
    m = result.metrics
    point = CurvePoint(args.beta, m.accuracy, m.mean_intervals, m.mean_tokens, m.objective)
    _emit(curve_to_csv([point]), args.out)
    if args.episodes_out:
        Path(args.episodes_out).write_text(episodes_to_csv(result.episodes), encoding="utf-8")
    if args.traces_out:
        retained = [e.trace for e in result.episodes if e.trace is not None]
        write_traces(args.traces_out, retained)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = _load_spec(args.spec, args.param)
    grid = tuple(float(b) for b in args.grid.split(","))
    resolved = {
        "spec": spec.to_dict(),
        "grid": list(grid),
        "pools": list(args.pools),
        "repeats": args.repeats,
        "seed": args.seed,
        "gamma": args.gamma,
        "kappa_probe": args.kappa_probe,
        "workers": args.workers,
    }
    _write_manifest(args, resolved, [p for p in (args.out,) if p])
    pools = _load_all_pools(args.pools)
    config = _eval_config(args, grid)
    result = sweep(spec, pools, config)
    _emit(curve_to_csv(result.points), args.out)
    return 0


def _cmd_discover(args: argparse.Namespace) -> int:
    raw = json.loads(Path(_resolve_path(args.config)).read_text(encoding="utf-8"))
    out_dir = Path(raw.get("out_dir", "discovery-run"))
    out_dir.mkdir(parents=True, exist_ok=True)
    grid = tuple(float(b) for b in raw.get("beta_grid", [0.25, 0.5, 0.75, 1.0]))
    eval_config = EvalConfig(
        repeats=int(raw.get("repeats", 64)),
        seed=int(raw.get("seed", 0)),
        gamma=float(raw.get("gamma", 0.0)),
        beta_grid=grid,
        cost_model=CostModel(kappa_probe=float(raw.get("kappa_probe", 0.0))),
        workers=int(raw.get("workers", 1)),
    )
    explorer_cmd = raw.get("explorer_cmd")
    if isinstance(explorer_cmd, str):
        explorer_cmd = shlex.split(explorer_cmd)
    resolved = dict(raw)
    resolved["seed"] = eval_config.seed
    history_path = out_dir / "history.json"
    selection_path = out_dir / "selection.csv"
    heldout_path = out_dir / "heldout.csv"
    if not getattr(args, "manifest", None):
        args.manifest = str(out_dir / "discover.manifest.json")
    _write_manifest(args, resolved, [str(history_path), str(selection_path), str(heldout_path)])

    config = DiscoveryConfig(
        search_pools=tuple(_load_all_pools(raw["search_pools"])),
        eval_pools=tuple(_load_all_pools(raw.get("eval_pools", []))),
        eval=eval_config,
        rounds=int(raw.get("rounds", 5)),
        explorer_command=None if explorer_cmd is None else tuple(explorer_cmd),
        explorer_seed=int(raw.get("explorer_seed", 0)),
        prompt=raw.get("prompt") or DEFAULT_PROMPT,
    )
    result = run_discovery(config, history_out=history_path)
    selection_csv = (
        "round,beta,accuracy,mean_tokens,spec_digest\n"
        f"{result.round_index},{result.beta:g},{result.accuracy:.6f},"
        f"{result.mean_tokens:.6f},{result.spec.digest()}\n"
    )
    selection_path.write_text(selection_csv, encoding="utf-8")
    sys.stdout.write(selection_csv)
    if config.eval_pools:
        heldout = evaluate(result.spec, result.beta, config.eval_pools, eval_config)
        m = heldout.metrics
        point = CurvePoint(result.beta, m.accuracy, m.mean_intervals, m.mean_tokens, m.objective)
        csv = curve_to_csv([point])
        heldout_path.write_text(csv, encoding="utf-8")
        sys.stdout.write(csv)
    return 0


def _cmd_trace(args: argparse.Namespace) -> int:
    _write_manifest(args, {"file": args.file}, [])
    traces = read_traces(_resolve_path(args.file))
    digests = digest(traces)
    lines = ["question_id,repeat,branches,prunes,probes,max_depth,stop_step,forced,final_agreement"]
    for d in digests:
        lines.append(
            f"{d.question_id},{d.repeat_index},{d.branches_opened},{d.prunes},{d.probes},"
            f"{d.max_depth},{d.stop_step},{int(d.forced_answer)},{d.final_agreement:.6f}"
        )
    if args.means:
        lines.append("")
        lines.append(
            "question_id,episodes,mean_branches,mean_prunes,mean_probes,"
            "mean_max_depth,mean_stop_step,forced_rate,mean_final_agreement"
        )
        for s in digest_means(digests):
            lines.append(
                f"{s.question_id},{s.episodes},{s.mean_branches:.6f},{s.mean_prunes:.6f},"
                f"{s.mean_probes:.6f},{s.mean_max_depth:.6f},{s.mean_stop_step:.6f},"
                f"{s.forced_rate:.6f},{s.mean_final_agreement:.6f}"
            )
    _emit("\n".join(lines) + "\n", args.out)
    return 0


# ---------------------------------------------------------------------------
# Parser wiring


def _add_common_eval_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pools", nargs="+", required=True, help="dataset files (JSONL)")
    parser.add_argument("--repeats", type=int, default=64)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--gamma", type=float, default=0.0)
    parser.add_argument("--kappa-probe", dest="kappa_probe", type=float, default=0.0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--param", action="append", help="override spec parameter, KEY=VALUE")
    parser.add_argument("--out", help="also write the result table to this file")
    parser.add_argument("--manifest", help="manifest path (default <command>.manifest.json)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ttsreplay", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="generate a synthetic dataset")
    p.add_argument("--questions", type=int, default=10)
    p.add_argument("--pool-size", dest="pool_size", type=int, default=16)
    p.add_argument("--max-depth", dest="max_depth", type=int, default=10)
    p.add_argument("--correct-rate", dest="correct_rate", type=float, default=0.8)
    p.add_argument(
        "--stabilize-weights",
        dest="stabilize_weights",
        default="0.5,0.5",
        help="comma-separated weights over stabilization depths 1..k",
    )
    p.add_argument("--noise-answers", dest="noise_answers", type=int, default=3)
    p.add_argument("--delta", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("validate", help="validate a dataset and print a summary")
    p.add_argument("--pools", nargs="+", required=True)
    p.add_argument("--out")
    p.add_argument("--manifest")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("eval", help="evaluate one controller at one beta")
    p.add_argument("--spec", required=True, help="builtin name or spec JSON file")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--episodes-out", dest="episodes_out", help="per-episode CSV export")
    p.add_argument(
        "--traces-out",
        dest="traces_out",
        help="write retained traces (first repeat per question) to this file",
    )
    _add_common_eval_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sweep", help="sweep a controller across a beta grid")
    p.add_argument("--spec", required=True)
    p.add_argument("--grid", default="0.25,0.5,0.75,1.0")
    _add_common_eval_flags(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("discover", help="run the discovery loop from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--manifest")
    p.set_defaults(func=_cmd_discover)

    p = sub.add_parser("trace", help="digest a trace file")
    p.add_argument("--file", required=True)
    p.add_argument("--means", action="store_true", help="append per-question means")
    p.add_argument("--out")
    p.add_argument("--manifest")
    p.set_defaults(func=_cmd_trace)

    return parser


def dispatch(argv: Sequence[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except _UsageError as exc:
        exc.parser.print_usage(sys.stderr)
        sys.stderr.write(f"error: {exc}\n")
        return 1
    try:
        return args.func(args)
    except ReplayError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except (OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
