"""Minimal conflicts and minimal diagnoses for infeasible tasks.

When the requirement set clashes with the model constraints, these
operations explain why (minimal conflicts: inconsistent constraint subsets
whose proper subsets are all consistent) and how to repair (minimal
diagnoses: requirement subsets whose removal restores consistency).
Conflict extraction is divide-and-conquer in the QuickXplain style;
diagnosis uses the FastDiag scheme for a single preferred diagnosis and a
breadth-first hitting-set tree (Reiter) for enumerating all of them in
non-decreasing cardinality.

Every consistency question is answered by the complete solver under a node
limit; a limit hit aborts the computation with UnknownVerdictError rather
than guessing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

from .model import ModelError, MultiConfigTask
from .search import SearchConfig, SolveStatus, solve

DEFAULT_NODE_LIMIT = 200_000


class Verdict(Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Conflict:
    """A minimal inconsistent subset of candidate constraint ids (relative
    to a fixed background)."""

    ids: frozenset[str]


@dataclass(frozen=True)
class Diagnosis:
    """A minimal set of requirement ids whose removal restores consistency."""

    ids: frozenset[str]


class UnknownVerdictError(RuntimeError):
    """A consistency check exhausted its limits; the diagnosis would be a
    guess, so it is aborted instead."""


class BackgroundInconsistentError(ModelError):
    """The supposedly-fixed background is inconsistent by itself."""


class _Session:
    """Caches solver verdicts for constraint-id subsets of one task."""

    def __init__(self, task: MultiConfigTask, node_limit: int | None):
        self.task = task
        self.cfg = SearchConfig(
            seed=0,
            max_solutions=1,
            node_limit=node_limit,
            symmetry_breaking=True,
            value_order="lexicographic",
        )
        self.cache: dict[frozenset[str], Verdict] = {}

    def verdict(self, ids: Iterable[str]) -> Verdict:
        key = frozenset(ids)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        result = solve(self.task.restricted(key), self.cfg)
        verdict = {
            SolveStatus.SAT: Verdict.CONSISTENT,
            SolveStatus.UNSAT: Verdict.INCONSISTENT,
            SolveStatus.UNKNOWN: Verdict.UNKNOWN,
        }[result.status]
        self.cache[key] = verdict
        return verdict

    def consistent(self, ids: Iterable[str]) -> bool:
        v = self.verdict(ids)
        if v is Verdict.UNKNOWN:
            raise UnknownVerdictError(
                "consistency check hit the node limit; raise the limit to diagnose"
            )
        return v is Verdict.CONSISTENT


def check(background: Iterable[str], candidate: Iterable[str],
          task: MultiConfigTask, *, node_limit: int | None = DEFAULT_NODE_LIMIT) -> Verdict:
    """Solver-decided satisfiability of background ∪ candidate.

    UNKNOWN only on limit exhaustion; unresolved ids are an input error.
    """
    session = _Session(task, node_limit)
    return session.verdict(frozenset(background) | frozenset(candidate))


def _qx(session: _Session, background: tuple[str, ...], delta: tuple[str, ...],
        candidates: tuple[str, ...]) -> tuple[str, ...]:
    if delta:
        v = session.verdict(background)
        if v is Verdict.UNKNOWN:
            raise UnknownVerdictError("conflict search hit the node limit")
        if v is Verdict.INCONSISTENT:
            return ()
    if len(candidates) == 1:
        return candidates
    mid = len(candidates) // 2
    c1, c2 = candidates[:mid], candidates[mid:]
    d2 = _qx(session, background + c1, c1, c2)
    d1 = _qx(session, background + d2, d2, c1)
    return d1 + d2


def _min_conflict_seq(session: _Session, background: Sequence[str],
                      candidates: Sequence[str]) -> tuple[str, ...] | None:
    bg = tuple(background)
    cands = tuple(candidates)
    if not session.consistent(bg):
        raise BackgroundInconsistentError(
            "background is inconsistent on its own; shrink it before "
            "searching for conflicts among the candidates"
        )
    if not cands or session.consistent(bg + cands):
        return None
    return _qx(session, bg, (), cands)


def min_conflict(background: Iterable[str], candidates: Sequence[str],
                 task: MultiConfigTask, *,
                 node_limit: int | None = DEFAULT_NODE_LIMIT) -> Conflict | None:
    """A minimal conflict within ``candidates`` against a consistent
    background, or None when no conflict exists."""
    session = _Session(task, node_limit)
    seq = _min_conflict_seq(session, tuple(background), tuple(candidates))
    return None if seq is None else Conflict(frozenset(seq))


def _fd(session: _Session, removed: tuple[str, ...], candidates: tuple[str, ...],
        active: frozenset[str]) -> tuple[str, ...]:
    if removed and session.consistent(active):
        return ()
    if len(candidates) == 1:
        return candidates
    mid = len(candidates) // 2
    c1, c2 = candidates[:mid], candidates[mid:]
    d1 = _fd(session, c1, c2, active - set(c1))
    d2 = _fd(session, d1, c1, active - set(d1))
    return tuple(dict.fromkeys(d1 + d2))


def fast_diag(requirements: Sequence[str], base: Iterable[str],
              task: MultiConfigTask, *,
              node_limit: int | None = DEFAULT_NODE_LIMIT) -> Diagnosis:
    """The preferred minimal diagnosis over ``requirements``.

    Preference follows declaration order: earlier-listed requirements are
    tried for removal first.  Returns an empty diagnosis when requirements
    and base are already consistent.
    """
    session = _Session(task, node_limit)
    req = tuple(requirements)
    bg = tuple(base)
    if not session.consistent(bg):
        raise BackgroundInconsistentError(
            "the base constraints are inconsistent by themselves; diagnose "
            "them directly by treating the base as the candidate set"
        )
    everything = frozenset(bg) | frozenset(req)
    if session.consistent(everything):
        return Diagnosis(frozenset())
    seq = _fd(session, (), req, everything)
    return Diagnosis(frozenset(seq))


@dataclass
class DiagnosisReport:
    """Outcome of a full diagnosis run: the minimal conflicts discovered and
    the minimal diagnoses, in non-decreasing cardinality order."""

    conflicts: list[Conflict]
    diagnoses: list[Diagnosis]


def _hsdag(session: _Session, requirements: tuple[str, ...],
           base: tuple[str, ...], max_n: int | None,
           verify: bool) -> DiagnosisReport:
    conflicts: list[tuple[str, ...]] = []

    def conflict_avoiding(removed: frozenset[str]) -> tuple[str, ...]:
        for known in conflicts:
            if not removed.intersection(known):
                return known
        remaining = tuple(r for r in requirements if r not in removed)
        seq = _qx(session, base, (), remaining)
        conflicts.append(seq)
        return seq

    found: list[frozenset[str]] = []
    queue: deque[frozenset[str]] = deque([frozenset()])
    seen = {frozenset()}
    while queue:
        if max_n is not None and len(found) >= max_n:
            break
        removed = queue.popleft()
        if any(d <= removed for d in found):
            continue  # closed: a subset already restores consistency
        keep = frozenset(base) | {r for r in requirements if r not in removed}
        if session.consistent(keep):
            if verify:
                _assert_minimal_diagnosis(session, removed, requirements, base)
            found.append(removed)
            continue
        for cid in conflict_avoiding(removed):
            child = removed | {cid}
            if child not in seen:
                seen.add(child)
                queue.append(child)
    return DiagnosisReport(
        conflicts=[Conflict(frozenset(c)) for c in conflicts],
        diagnoses=[Diagnosis(d) for d in found],
    )


def _assert_minimal_diagnosis(session: _Session, removed: frozenset[str],
                              requirements: tuple[str, ...], base: tuple[str, ...]):
    for cid in removed:
        smaller = removed - {cid}
        keep = frozenset(base) | {r for r in requirements if r not in smaller}
        if session.consistent(keep):
            raise AssertionError(f"diagnosis {sorted(removed)} is not minimal ({cid} is redundant)")


def diagnoses(requirements: Sequence[str], base: Iterable[str],
              task: MultiConfigTask, max_n: int | None = None, *,
              node_limit: int | None = DEFAULT_NODE_LIMIT,
              verify: bool = False) -> list[Diagnosis]:
    """Up to ``max_n`` distinct minimal diagnoses, smallest first."""
    return diagnose_report(requirements, base, task, max_n,
                           node_limit=node_limit, verify=verify).diagnoses


def diagnose_report(requirements: Sequence[str], base: Iterable[str],
                    task: MultiConfigTask, max_n: int | None = None, *,
                    node_limit: int | None = DEFAULT_NODE_LIMIT,
                    verify: bool = False) -> DiagnosisReport:
    """Run conflict-driven diagnosis and keep the conflicts for reporting."""
    session = _Session(task, node_limit)
    req = tuple(requirements)
    bg = tuple(base)
    if not session.consistent(bg):
        raise BackgroundInconsistentError(
            "the base constraints are inconsistent by themselves; diagnose "
            "them directly by treating the base as the candidate set"
        )
    if session.consistent(frozenset(bg) | frozenset(req)):
        return DiagnosisReport(conflicts=[], diagnoses=[])
    return _hsdag(session, req, bg, max_n, verify)
