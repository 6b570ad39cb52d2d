"""Independent brute-force oracles used to cross-check the engine.

Everything here is written directly against the transition semantics using
plain dicts/lists, on purpose sharing no code with the package: the whole
point is that two independent implementations must agree.
"""

from __future__ import annotations

import random
from collections import Counter

# Pools are plain lists: pool[i] = [(tokens, answer_or_None), ...]


def pool_to_lists(pool) -> list[list[tuple[int, str | None]]]:
    return [[(iv.tokens, iv.answer) for iv in t.intervals] for t in pool.trajectories]


def fresh_state(n_trajectories: int) -> dict:
    return {
        "m": 0,
        "active": set(),
        "depth": {},       # branch id (1-based) -> depth
        "prefix": {},      # branch id -> list of (tokens, answer) seen so far
        "revealed": set(), # (branch id, depth, answer)
        "done": False,
        "n": n_trajectories,
    }


def oracle_admissible(state: dict, pool: list) -> set[tuple[str, int | None]]:
    assert not state["done"]
    acts: set[tuple[str, int | None]] = {("answer", None)}
    if state["m"] < state["n"]:
        acts.add(("branch", None))
    for i in sorted(state["active"]):
        acts.add(("prune", i))
        depth = state["depth"][i]
        backing = pool[state["order"][i - 1]]
        if depth < len(backing):
            acts.add(("continue", i))
        if not any(r[0] == i and r[1] == depth for r in state["revealed"]):
            acts.add(("probe", i))
    return acts


def oracle_step(state: dict, action: tuple[str, int | None], pool: list) -> dict:
    kind, i = action
    s = {
        "m": state["m"],
        "active": set(state["active"]),
        "depth": dict(state["depth"]),
        "prefix": {k: list(v) for k, v in state["prefix"].items()},
        "revealed": set(state["revealed"]),
        "done": state["done"],
        "n": state["n"],
        "order": state["order"],
    }
    if kind == "answer":
        s["done"] = True
    elif kind == "branch":
        new = s["m"] + 1
        backing = pool[s["order"][new - 1]]
        s["m"] = new
        s["active"].add(new)
        s["depth"][new] = 1
        s["prefix"][new] = [backing[0]]
    elif kind == "continue":
        backing = pool[s["order"][i - 1]]
        s["depth"][i] += 1
        s["prefix"][i].append(backing[s["depth"][i] - 1])
    elif kind == "probe":
        backing = pool[s["order"][i - 1]]
        depth = s["depth"][i]
        s["revealed"].add((i, depth, backing[depth - 1][1]))
    elif kind == "prune":
        s["active"].discard(i)
    else:
        raise AssertionError(kind)
    return s


def oracle_cost(state: dict, kappa: float) -> float:
    return sum(state["depth"].values()) + kappa * len(state["revealed"])


def engine_state_view(state, pool, order) -> tuple:
    """Normalize an engine ReplayState into the oracle's comparison shape."""
    prefixes = {}
    for rec in state.branches:
        intervals = pool.trajectories[rec.pool_branch_ref].intervals
        prefixes[rec.branch_id] = [(iv.tokens, iv.answer) for iv in intervals[: rec.depth]]
    return (
        state.m,
        set(state.active_ids),
        {b.branch_id: b.depth for b in state.branches},
        prefixes,
        {(bid, depth, ans) for (bid, depth), ans in state.revealed.items()},
        state.terminated,
    )


def oracle_state_view(state: dict) -> tuple:
    return (
        state["m"],
        set(state["active"]),
        dict(state["depth"]),
        {k: list(v) for k, v in state["prefix"].items()},
        set(state["revealed"]),
        state["done"],
    )


# ---------------------------------------------------------------------------
# Random pool construction for fuzzing


def random_pool_lists(rng: random.Random, max_n=4, max_depth=5, answers=("a", "b", "c", None)) -> list:
    n = rng.randint(1, max_n)
    pool = []
    for _ in range(n):
        depth = rng.randint(1, max_depth)
        traj = [(500, rng.choice(answers)) for _ in range(depth - 1)]
        # final interval: any token count, and keep at least some parseable finals
        traj.append((rng.randint(1, 500), rng.choice([a for a in answers if a is not None])))
        pool.append(traj)
    return pool


def lists_to_pool(lists: list, question_id="fuzz", ground_truth="a", delta=500):
    from ttsreplay.trajectory_data import Interval, Trajectory, TrajectoryPool

    trajs = []
    for raw in lists:
        ivs = [Interval(500, ans) for _, ans in raw[:-1]]
        ivs.append(Interval(raw[-1][0], raw[-1][1]))
        trajs.append(Trajectory(tuple(ivs)))
    return TrajectoryPool(question_id, ground_truth, delta, tuple(trajs))


# ---------------------------------------------------------------------------
# Baseline scan oracles: direct computations over finals, no MDP involved


def _majority(votes: list[str | None]) -> str | None:
    usable = [v for v in votes if v is not None]
    if not usable:
        return None
    counts = Counter(usable)
    top = max(counts.values())
    for v in usable:  # first trajectory holding a top answer wins ties
        if counts[v] == top:
            return v
    raise AssertionError


def sc_oracle(pool_lists: list, order: list[int], width: int) -> tuple[str | None, int]:
    used = [pool_lists[order[k]] for k in range(min(width, len(pool_lists)))]
    finals = [t[-1][1] for t in used]
    return _majority(finals), sum(len(t) for t in used)


def asc_oracle(
    pool_lists: list, order: list[int], threshold: float, k_min: int, max_width: int | None = None
) -> tuple[str | None, int]:
    limit = min(max_width or len(pool_lists), len(pool_lists))
    finals: list[str | None] = []
    cost = 0
    for k in range(limit):
        traj = pool_lists[order[k]]
        cost += len(traj)
        finals.append(traj[-1][1])
        n = len(finals)
        usable = [f for f in finals if f is not None]
        freq = (max(Counter(usable).values()) / n) if usable else 0.0
        if n >= k_min and freq >= threshold:
            break
    return _majority(finals), cost


def esc_oracle(
    pool_lists: list, order: list[int], chunk: int, max_width: int | None = None
) -> tuple[str | None, int]:
    limit = min(max_width or len(pool_lists), len(pool_lists))
    finals: list[str | None] = []
    cost = 0
    k = 0
    while k < limit:
        take = min(chunk, limit - k)
        window = []
        for _ in range(take):
            traj = pool_lists[order[k]]
            cost += len(traj)
            finals.append(traj[-1][1])
            window.append(traj[-1][1])
            k += 1
        if window and None not in window and len(set(window)) == 1:
            break
    return _majority(finals), cost


def best_uniform_stop_cost(pool_lists: list, order: list[int], width: int) -> int | None:
    """Minimal intervals over uniform truncation depths that reproduce the
    full-depth majority answer for the given subset. None if no depth works
    short of full depth (full depth always works, so None never happens)."""
    used = [pool_lists[order[k]] for k in range(min(width, len(pool_lists)))]
    target = _majority([t[-1][1] for t in used])
    best = None
    for depth in range(1, max(len(t) for t in used) + 1):
        votes = [t[min(depth, len(t)) - 1][1] for t in used]
        if _majority(votes) == target:
            cost = sum(min(depth, len(t)) for t in used)
            if best is None or cost < best:
                best = cost
    return best
