"""Complete backtracking search over domain stores.

A single deterministic DFS: fail-first variable choice, lexicographic or
seeded-shuffle value order, and optional symmetry breaking that forces the
slots of each uniqueness-constrained instance into strictly ascending id
order (slots carry no positional meaning, so this only removes permutation
duplicates).  Every emitted solution is re-verified through the model
evaluator, an independent code path from the propagators.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterator

from .model import (
    ModelError,
    MultiConfigTask,
    MultiConfiguration,
    SlotVar,
    is_consistent,
)
from .propagate import (
    DomainStore,
    FixpointResult,
    Outcome,
    Propagator,
    PropagatorSet,
    compile_propagators,
    init_store,
)

VALUE_ORDERS = ("lexicographic", "seeded_shuffle")


class SolveStatus(Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for one search run; identical configs give identical runs."""

    seed: int = 0
    max_solutions: int | None = 1
    node_limit: int | None = None
    time_limit_ms: int | None = None
    symmetry_breaking: bool = True
    value_order: str = "seeded_shuffle"

    def __post_init__(self):
        if self.max_solutions is not None and self.max_solutions < 1:
            raise ModelError("max_solutions must be >= 1 (or None for unbounded)")
        if self.node_limit is not None and self.node_limit < 1:
            raise ModelError("node_limit must be positive")
        if self.time_limit_ms is not None and self.time_limit_ms < 1:
            raise ModelError("time_limit_ms must be positive")
        if self.value_order not in VALUE_ORDERS:
            raise ModelError(f"value_order must be one of {VALUE_ORDERS}")


@dataclass
class SearchStats:
    nodes: int = 0
    failures: int = 0
    propagation_fixpoints: int = 0
    elapsed_ms: float = 0.0


@dataclass
class SolveResult:
    status: SolveStatus
    solution: MultiConfiguration | None
    stats: SearchStats


@dataclass
class EnumerateResult:
    """``exhausted`` means the whole space was explored: the solution list is
    complete (modulo max_solutions truncation) and emptiness proves unsat.
    ``limit_hit`` flags a node/time interruption, i.e. an unknown tail."""

    solutions: tuple[MultiConfiguration, ...]
    stats: SearchStats
    exhausted: bool
    limit_hit: bool


def choose_variable(store: DomainStore) -> SlotVar | None:
    """Unassigned slot with the smallest domain; ties broken by (instance,
    slot) order.  None when every slot is assigned."""
    best = -1
    best_size = 0
    for s, m in enumerate(store.masks):
        c = m.bit_count()
        if c > 1 and (best < 0 or c < best_size):
            best, best_size = s, c
    if best < 0:
        return None
    return SlotVar(best // store.l + 1, best % store.l + 1)


def _mix(*parts: int) -> int:
    # splitmix64-style stirring; stable across runs and platforms
    h = 0x9E3779B97F4A7C15
    for x in parts:
        h = (h ^ (x & 0xFFFFFFFFFFFFFFFF)) * 0xBF58476D1CE4E5B9 % (1 << 64)
        h ^= h >> 27
        h = h * 0x94D049BB133111EB % (1 << 64)
        h ^= h >> 31
    return h


def order_values(store: DomainStore, var: SlotVar, cfg: SearchConfig) -> list[int]:
    """Value order for branching on ``var``.

    Lexicographic mode returns ascending ids.  Seeded-shuffle draws a
    permutation from a generator keyed by (seed, instance, slot, depth),
    where depth is the number of already-decided slots, so re-visiting the
    same slot deeper in the tree reorders independently.

    When the slot sits in an ascending ordering chain (symmetry breaking on
    a uniqueness instance), the shuffled values are additionally ranked by
    distance to the slot's expected order-statistic position: a slot with
    nine unassigned successors must leave room above, so trying mid-range
    ids first would strand the successors.  Plain uniform order behaves
    like stick-breaking there and thrashes; this keeps the sampled exams
    distributed like unordered draws.
    """
    m = store.mask(var.instance, var.slot)
    values = []
    while m:
        low = m & -m
        values.append(low.bit_length())
        m ^= low
    if cfg.value_order != "seeded_shuffle":
        return values
    depth = sum(1 for mm in store.masks if mm & (mm - 1) == 0)
    rng = random.Random(_mix(cfg.seed, var.instance, var.slot, depth))
    rng.shuffle(values)
    if cfg.symmetry_breaking and var.instance in store.task.uniqueness_instances:
        base = (var.instance - 1) * store.l
        masks = store.masks
        before = sum(1 for j in range(0, var.slot - 1)
                     if masks[base + j] & (masks[base + j] - 1))
        after = sum(1 for j in range(var.slot, store.l)
                    if masks[base + j] & (masks[base + j] - 1))
        if before or after:
            d = len(values)
            rank = {v: t for t, v in enumerate(sorted(values))}
            ideal = d * (before + 1) // (before + after + 2)
            width = max(1, d // (before + after + 2))
            values.sort(key=lambda v: abs(rank[v] - ideal) // width)
    return values


def _chain_step(slots: tuple[int, ...]):
    """Bounds filter for id(slot_1) < id(slot_2) < ... (symmetry breaking)."""

    def step(store: DomainStore) -> Outcome:
        masks = store.masks
        changed = False
        lo = 0
        for s in slots:
            m = masks[s]
            if lo:
                low_bits = (1 << lo) - 1
                if m & low_bits:
                    store.restrict(s, ~low_bits)
                    changed = True
                    m = masks[s]
            if m == 0:
                return Outcome.FAILED
            lo = (m & -m).bit_length()
        hi = 0
        for s in reversed(slots):
            m = masks[s]
            if hi:
                keep = (1 << (hi - 1)) - 1
                if m & ~keep:
                    store.restrict(s, keep)
                    changed = True
                    m = masks[s]
            if m == 0:
                return Outcome.FAILED
            hi = m.bit_length()
        return Outcome.PRUNED if changed else Outcome.NOOP

    return step


def _symmetry_propagators(task: MultiConfigTask) -> list[Propagator]:
    props = []
    for i in sorted(task.uniqueness_instances):
        if task.l > 1:
            slots = tuple(range((i - 1) * task.l, i * task.l))
            props.append(Propagator(f"__order_{i}", slots, _chain_step(slots)))
    return props


class _LimitHit(Exception):
    pass


def _dfs(store: DomainStore, engine: PropagatorSet, cfg: SearchConfig,
         stats: SearchStats, deadline: float | None,
         task: MultiConfigTask) -> Iterator[MultiConfiguration]:
    var = choose_variable(store)
    if var is None:
        conf = store.as_configuration()
        if not is_consistent(conf, task):
            raise RuntimeError(
                "internal error: search emitted a configuration the evaluator rejects"
            )
        yield conf
        return
    flat = store.idx(var.instance, var.slot)
    for value in order_values(store, var, cfg):
        stats.nodes += 1
        if cfg.node_limit is not None and stats.nodes > cfg.node_limit:
            raise _LimitHit
        if deadline is not None and time.monotonic() > deadline:
            raise _LimitHit
        child = store.copy()
        child.assign(var.instance, var.slot, value)
        stats.propagation_fixpoints += 1
        if engine.fixpoint(child, dirty=(flat,)) is FixpointResult.FAILED:
            stats.failures += 1
            continue
        yield from _dfs(child, engine, cfg, stats, deadline, task)


def enumerate_solutions(task: MultiConfigTask, cfg: SearchConfig | None = None) -> EnumerateResult:
    """Up to max_solutions pairwise-distinct solutions, depth-first.

    With symmetry breaking on, each uniqueness-constrained instance is
    emitted in canonical (ascending) slot order, so no two results are slot
    permutations of each other.  Deterministic for a fixed config.
    """
    cfg = cfg or SearchConfig()
    stats = SearchStats()
    start = time.monotonic()
    deadline = None
    if cfg.time_limit_ms is not None:
        deadline = start + cfg.time_limit_ms / 1000.0

    solutions: list[MultiConfiguration] = []
    limit_hit = False
    exhausted = False

    store = init_store(task)
    props = list(compile_propagators(task))
    if cfg.symmetry_breaking:
        props.extend(_symmetry_propagators(task))
    engine = PropagatorSet(props)

    stats.propagation_fixpoints += 1
    if engine.fixpoint(store) is FixpointResult.FAILED:
        exhausted = True
    else:
        try:
            for conf in _dfs(store, engine, cfg, stats, deadline, task):
                solutions.append(conf)
                if cfg.max_solutions is not None and len(solutions) >= cfg.max_solutions:
                    break
            else:
                exhausted = True
        except _LimitHit:
            limit_hit = True

    stats.elapsed_ms = (time.monotonic() - start) * 1000.0
    return EnumerateResult(tuple(solutions), stats, exhausted, limit_hit)


def solve(task: MultiConfigTask, cfg: SearchConfig | None = None) -> SolveResult:
    """One solution, a proof of unsatisfiability, or UNKNOWN on limits."""
    cfg = cfg or SearchConfig()
    if cfg.max_solutions != 1:
        cfg = replace(cfg, max_solutions=1)
    res = enumerate_solutions(task, cfg)
    if res.solutions:
        return SolveResult(SolveStatus.SAT, res.solutions[0], res.stats)
    if res.exhausted:
        return SolveResult(SolveStatus.UNSAT, None, res.stats)
    return SolveResult(SolveStatus.UNKNOWN, None, res.stats)
