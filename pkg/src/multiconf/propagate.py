"""Candidate-domain maintenance and constraint propagation.

Each slot variable carries a bitset of still-possible question ids (bit
qid-1).  Propagators are sound filters: a value is only removed when it
cannot appear in any complete assignment satisfying that propagator's own
constraint.  Filtering is counting/bounds strength, not full arc
consistency; the search layer supplies completeness.  Domains only shrink,
so the fixpoint is unique regardless of scheduling order.
"""

from __future__ import annotations

import math
import operator as _op
from bisect import bisect_left, bisect_right
from collections import deque
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from itertools import combinations
from typing import Callable, Iterable, Sequence

from .model import (
    AllDifferentSlots,
    And,
    AttrCmp,
    AttrIn,
    AttrRef,
    Compare,
    Count,
    CURRENT,
    Expr,
    ForAllInstances,
    ForAllSlots,
    Lit,
    ModelError,
    MultiConfigTask,
    MultiConfiguration,
    Not,
    Or,
    Overlap,
    PAIR_FIRST,
    PAIR_SECOND,
    PairwiseInstances,
    Pred,
    Question,
    Scope,
    Share,
    Sum,
    evaluate,
)

_CMP = {"<=": _op.le, "<": _op.lt, "==": _op.eq,
        "!=": _op.ne, ">": _op.gt, ">=": _op.ge}
_FLIP = {"<=": ">=", "<": ">", ">=": "<=", ">": "<"}

_BIG = 1 << 62


class Outcome(Enum):
    FAILED = "failed"
    PRUNED = "pruned"
    NOOP = "no-op"
    ENTAILED = "entailed"


class FixpointResult(Enum):
    STABLE = "stable"
    FAILED = "failed"


class DomainStore:
    """Mutable per-slot domains for one task; owned by a single worker.

    Slot (i, j) lives at flat index (i-1)*l + (j-1).  ``changed`` records
    flat indices whose domain shrank since the last fixpoint drain.
    """

    __slots__ = ("task", "k", "l", "p", "full", "masks", "changed")

    def __init__(self, task: MultiConfigTask, masks: list[int] | None = None):
        self.task = task
        self.k = task.k
        self.l = task.l
        self.p = task.bank.p
        self.full = (1 << self.p) - 1
        self.masks = list(masks) if masks is not None else [self.full] * (self.k * self.l)
        self.changed: list[int] = []

    def idx(self, instance: int, slot: int) -> int:
        if not (1 <= instance <= self.k and 1 <= slot <= self.l):
            raise ModelError(f"slot ({instance}, {slot}) outside {self.k}x{self.l}")
        return (instance - 1) * self.l + (slot - 1)

    def mask(self, instance: int, slot: int) -> int:
        return self.masks[self.idx(instance, slot)]

    def domain(self, instance: int, slot: int) -> frozenset[int]:
        return frozenset(_iter_ids(self.mask(instance, slot)))

    def restrict(self, flat: int, allowed: int) -> bool:
        """Intersect a domain with a permitted-id mask; True if it shrank."""
        old = self.masks[flat]
        new = old & allowed
        if new == old:
            return False
        self.masks[flat] = new
        self.changed.append(flat)
        return True

    def assign(self, instance: int, slot: int, qid: int) -> bool:
        return self.restrict(self.idx(instance, slot), 1 << (qid - 1))

    @property
    def is_failed(self) -> bool:
        return any(m == 0 for m in self.masks)

    def copy(self) -> DomainStore:
        return DomainStore(self.task, self.masks)

    def unassigned(self) -> list[int]:
        return [s for s, m in enumerate(self.masks) if m & (m - 1)]

    def as_configuration(self) -> MultiConfiguration:
        """The single configuration left when every domain is a singleton."""
        rows = []
        for i in range(self.k):
            row = []
            for j in range(self.l):
                m = self.masks[i * self.l + j]
                if m == 0 or m & (m - 1):
                    raise ModelError("store is not fully assigned")
                row.append(m.bit_length())
            rows.append(tuple(row))
        return MultiConfiguration(tuple(rows))


def _iter_ids(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length()
        mask ^= low


def _mask_of(ids: Iterable[int]) -> int:
    m = 0
    for qid in ids:
        m |= 1 << (qid - 1)
    return m


# ---------------------------------------------------------------------------
# Exact share-to-count conversion


def share_count_band(lo: Fraction | int | None, hi: Fraction | int | None,
                     scope_size: int) -> tuple[int, int]:
    """Integer count band equivalent to lo <= count/scope_size <= hi.

    Exact rational arithmetic: count/n >= lo iff count >= ceil(lo*n), and
    count/n <= hi iff count <= floor(hi*n).  The band may be empty (lo > hi
    after rounding), meaning no integer count satisfies the share range.
    """
    if scope_size < 1:
        raise ModelError("scope size must be >= 1")
    clo = 0 if lo is None else math.ceil(Fraction(lo) * scope_size)
    chi = scope_size if hi is None else math.floor(Fraction(hi) * scope_size)
    return max(clo, 0), min(chi, scope_size)


def _int_band(op: str, threshold) -> tuple[int | None, int | None] | None:
    """Band [lo, hi] on an integer quantity equivalent to `quantity op t`;
    None if the operator does not induce a band (!=)."""
    t = Fraction(threshold)
    if op == "<=":
        return None, math.floor(t)
    if op == "<":
        return None, math.ceil(t) - 1
    if op == ">=":
        return math.ceil(t), None
    if op == ">":
        return math.floor(t) + 1, None
    if op == "==":
        if t.denominator != 1:
            return 1, 0  # empty band: an integer can never equal it
        return int(t), int(t)
    return None


# ---------------------------------------------------------------------------
# Per-question tests and unary filters


def _question_test(body) -> Callable[[Question], bool] | None:
    """Compile a ForAllSlots body into a per-question test, if it only
    relates the slot's own attributes to literals."""
    if isinstance(body, Compare):
        lhs, rhs, op = body.lhs, body.rhs, body.op
        if isinstance(lhs, Lit) and isinstance(rhs, AttrRef):
            lhs, rhs = rhs, lhs
            op = _FLIP.get(op, op)
        if isinstance(lhs, AttrRef) and isinstance(rhs, Lit):
            attr, value, fn = lhs.attr, rhs.value, _CMP[op]
            return lambda q: fn(q.attr(attr), value)
        return None
    if isinstance(body, And):
        subs = [_question_test(a) for a in body.args]
        if any(s is None for s in subs):
            return None
        return lambda q: all(s(q) for s in subs)
    if isinstance(body, Or):
        subs = [_question_test(a) for a in body.args]
        if any(s is None for s in subs):
            return None
        return lambda q: any(s(q) for s in subs)
    if isinstance(body, Not):
        sub = _question_test(body.arg)
        if sub is None:
            return None
        return lambda q: not sub(q)
    return None


@dataclass(frozen=True)
class UnaryFilter:
    """Delete every id outside ``keep`` from all slots in scope."""

    scope: Scope
    keep: frozenset[int]


def compile_unary(expr, bank) -> UnaryFilter | None:
    """Recognize constraints enforceable by a single per-slot value filter.

    Two shapes qualify: a universally quantified per-question attribute
    bound, and a zero-cardinality bound (count or share of matching slots
    is 0).  Anything else returns None ("not unary").
    """
    if isinstance(expr, ForAllSlots):
        test = _question_test(expr.body)
        if test is None:
            return None
        keep = frozenset(q.id for q in bank.questions if test(q))
        return UnaryFilter(expr.scope, keep)
    if isinstance(expr, Compare):
        lhs, rhs, op = expr.lhs, expr.rhs, expr.op
        if isinstance(lhs, Lit) and not isinstance(rhs, Lit):
            lhs, rhs = rhs, lhs
            op = _FLIP.get(op, op)
        if not (isinstance(lhs, (Count, Share)) and isinstance(rhs, Lit)):
            return None
        if isinstance(lhs, Share):
            # share thresholds scale with the (here unknown) scope size;
            # only `share <= 0` / `share = 0` are size-independent
            if not (rhs.value == 0 and op in ("<=", "==")):
                return None
            lo, hi = 0, 0
        else:
            band = _int_band(op, rhs.value)
            if band is None:
                return None
            lo, hi = band
        if hi is not None and hi == 0 and (lo is None or lo <= 0):
            # nothing in scope may match: drop the matching ids everywhere
            matching = bank.matching_ids(lhs.pred)
            keep = frozenset(q.id for q in bank.questions) - matching
            return UnaryFilter(lhs.scope, keep)
        return None
    return None


# ---------------------------------------------------------------------------
# Placeholder substitution and normalization into propagation atoms


def _subst(expr, env: dict):
    """Replace bound instance placeholders with concrete indices, honoring
    shadowing by nested quantifiers."""

    def ref(r):
        return env.get(r, r) if isinstance(r, str) else r

    def scope(s: Scope) -> Scope:
        if s.instances is None:
            return s
        return Scope(tuple(ref(r) for r in s.instances))

    if isinstance(expr, Compare):
        return Compare(expr.op, _subst(expr.lhs, env), _subst(expr.rhs, env))
    if isinstance(expr, And):
        return And(tuple(_subst(a, env) for a in expr.args))
    if isinstance(expr, Or):
        return Or(tuple(_subst(a, env) for a in expr.args))
    if isinstance(expr, Not):
        return Not(_subst(expr.arg, env))
    if isinstance(expr, ForAllInstances):
        inner = {k: v for k, v in env.items() if k != CURRENT}
        return ForAllInstances(_subst(expr.body, inner))
    if isinstance(expr, PairwiseInstances):
        inner = {k: v for k, v in env.items() if k not in (PAIR_FIRST, PAIR_SECOND)}
        return PairwiseInstances(_subst(expr.body, inner))
    if isinstance(expr, ForAllSlots):
        return ForAllSlots(scope(expr.scope), _subst(expr.body, env))
    if isinstance(expr, AllDifferentSlots):
        return AllDifferentSlots(ref(expr.instance))
    if isinstance(expr, Count):
        return Count(scope(expr.scope), expr.pred)
    if isinstance(expr, Share):
        return Share(scope(expr.scope), expr.pred)
    if isinstance(expr, Sum):
        return Sum(scope(expr.scope), expr.attr)
    if isinstance(expr, Overlap):
        return Overlap(ref(expr.first), ref(expr.second))
    return expr  # Lit, AttrRef


def _scope_flat(scope: Scope, k: int, l: int) -> tuple[int, ...]:
    if scope.instances is None:
        return tuple(range(k * l))
    out = []
    for ref in dict.fromkeys(scope.instances):
        if not isinstance(ref, int):
            raise ModelError(f"unresolved placeholder {ref!r}")
        out.extend(range((ref - 1) * l, ref * l))
    return tuple(out)


def _expr_flat_slots(expr, k: int, l: int) -> tuple[int, ...]:
    found: set[int] = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if isinstance(node, (And, Or)):
            stack.extend(node.args)
        elif isinstance(node, Not):
            stack.append(node.arg)
        elif isinstance(node, Compare):
            stack.extend((node.lhs, node.rhs))
        elif isinstance(node, (ForAllInstances, PairwiseInstances)):
            return tuple(range(k * l))  # quantifies over every instance
        elif isinstance(node, ForAllSlots):
            found.update(_scope_flat(node.scope, k, l))
            stack.append(node.body)
        elif isinstance(node, (Count, Share, Sum)):
            found.update(_scope_flat(node.scope, k, l))
        elif isinstance(node, Overlap):
            found.update(_scope_flat(Scope.of(node.first, node.second), k, l))
        elif isinstance(node, AllDifferentSlots):
            found.update(_scope_flat(Scope.of(node.instance), k, l))
    return tuple(sorted(found))


@dataclass(frozen=True)
class _CountBand:
    slots: tuple[int, ...]
    pred_mask: int
    lo: int
    hi: int


@dataclass(frozen=True)
class _SumBand:
    slots: tuple[int, ...]
    attr: str
    lo: int
    hi: int


@dataclass(frozen=True)
class _Choice:
    slots: tuple[int, ...]
    idmask: int


@dataclass(frozen=True)
class _AllDiff:
    slots: tuple[int, ...]


@dataclass(frozen=True)
class _OverlapBand:
    slots_a: tuple[int, ...]
    slots_b: tuple[int, ...]
    lo: int
    hi: int


@dataclass(frozen=True)
class _Filter:
    slots: tuple[int, ...]
    keep_mask: int


@dataclass(frozen=True)
class _Residual:
    expr: Expr
    slots: tuple[int, ...]


@dataclass(frozen=True)
class _AlwaysFalse:
    slots: tuple[int, ...]


def _atoms_of(expr, task: MultiConfigTask) -> list:
    """Break one constraint into propagation atoms (conjuncts)."""
    k, l, bank = task.k, task.l, task.bank
    out: list = []

    def emit_compare(node: Compare):
        lhs, rhs, op = node.lhs, node.rhs, node.op
        if isinstance(lhs, Lit) and not isinstance(rhs, Lit):
            lhs, rhs = rhs, lhs
            op = _FLIP.get(op, op)
        if not isinstance(rhs, Lit):
            out.append(_Residual(node, _expr_flat_slots(node, k, l)))
            return
        if isinstance(lhs, Lit):
            if not _CMP[op](lhs.value, rhs.value):
                out.append(_AlwaysFalse(()))
            return
        if isinstance(lhs, (Count, Share)):
            slots = _scope_flat(lhs.scope, k, l)
            n = len(slots)
            threshold = rhs.value if isinstance(lhs, Count) else Fraction(rhs.value) * n
            band = _int_band(op, threshold)
            if band is None:
                out.append(_Residual(node, slots))
                return
            lo = 0 if band[0] is None else max(band[0], 0)
            hi = n if band[1] is None else min(band[1], n)
            if lo > hi:
                out.append(_AlwaysFalse(slots))
            elif lo == 0 and hi == n:
                pass  # vacuous
            elif hi == 0:
                keep = task.bank.matching_mask(lhs.pred) ^ ((1 << bank.p) - 1)
                out.append(_Filter(slots, keep))
            elif lo == n:
                out.append(_Filter(slots, task.bank.matching_mask(lhs.pred)))
            elif lo == 1 and hi == n and isinstance(lhs.pred, AttrIn) and lhs.pred.attr == "id":
                out.append(_Choice(slots, _mask_of(lhs.pred.values)))
            else:
                out.append(_CountBand(slots, task.bank.matching_mask(lhs.pred), lo, hi))
            return
        if isinstance(lhs, Sum):
            slots = _scope_flat(lhs.scope, k, l)
            band = _int_band(op, rhs.value)
            if band is None:
                out.append(_Residual(node, slots))
                return
            lo = -_BIG if band[0] is None else band[0]
            hi = _BIG if band[1] is None else band[1]
            if lo > hi:
                out.append(_AlwaysFalse(slots))
            else:
                out.append(_SumBand(slots, lhs.attr, lo, hi))
            return
        if isinstance(lhs, Overlap):
            a = _scope_flat(Scope.of(lhs.first), k, l)
            b = _scope_flat(Scope.of(lhs.second), k, l)
            band = _int_band(op, rhs.value)
            if band is None:
                out.append(_Residual(node, a + b))
                return
            lo = 0 if band[0] is None else max(band[0], 0)
            hi = l if band[1] is None else min(band[1], l)
            if lo > hi:
                out.append(_AlwaysFalse(a + b))
            elif lo == 0 and hi >= l:
                pass
            else:
                out.append(_OverlapBand(a, b, lo, hi))
            return
        out.append(_Residual(node, _expr_flat_slots(node, k, l)))

    def walk(node):
        if isinstance(node, And):
            for a in node.args:
                walk(a)
        elif isinstance(node, ForAllInstances):
            for i in range(1, k + 1):
                walk(_subst(node.body, {CURRENT: i}))
        elif isinstance(node, PairwiseInstances):
            for a, b in combinations(range(1, k + 1), 2):
                walk(_subst(node.body, {PAIR_FIRST: a, PAIR_SECOND: b}))
        elif isinstance(node, AllDifferentSlots):
            out.append(_AllDiff(_scope_flat(Scope.of(node.instance), k, l)))
        elif isinstance(node, ForAllSlots):
            test = _question_test(node.body)
            slots = _scope_flat(node.scope, k, l)
            if test is None:
                out.append(_Residual(node, slots))
            else:
                keep = _mask_of(q.id for q in bank.questions if test(q))
                out.append(_Filter(slots, keep))
        elif isinstance(node, Compare):
            emit_compare(node)
        else:
            out.append(_Residual(node, _expr_flat_slots(node, k, l)))

    walk(expr)
    return _merge_bands(out)


def _merge_bands(atoms: list) -> list:
    """Intersect count/sum bands over the same slots and predicate.

    A two-sided share range arrives as two one-sided compares; merging them
    recovers the joint integer band, and an empty intersection (e.g. a share
    window no integer count can hit) becomes an immediate failure instead of
    a pair of individually-satisfiable bounds the search would have to
    refute exhaustively.
    """
    merged: list = []
    count_at: dict[tuple, int] = {}
    sum_at: dict[tuple, int] = {}
    for atom in atoms:
        if isinstance(atom, _CountBand):
            key = (atom.slots, atom.pred_mask)
            if key in count_at:
                pos = count_at[key]
                prev = merged[pos]
                if isinstance(prev, _CountBand):
                    lo = max(prev.lo, atom.lo)
                    hi = min(prev.hi, atom.hi)
                    merged[pos] = (_CountBand(atom.slots, atom.pred_mask, lo, hi)
                                   if lo <= hi else _AlwaysFalse(atom.slots))
                continue
            count_at[key] = len(merged)
        elif isinstance(atom, _SumBand):
            key = (atom.slots, atom.attr)
            if key in sum_at:
                pos = sum_at[key]
                prev = merged[pos]
                if isinstance(prev, _SumBand):
                    lo = max(prev.lo, atom.lo)
                    hi = min(prev.hi, atom.hi)
                    merged[pos] = (_SumBand(atom.slots, atom.attr, lo, hi)
                                   if lo <= hi else _AlwaysFalse(atom.slots))
                continue
            sum_at[key] = len(merged)
        merged.append(atom)
    return merged


# ---------------------------------------------------------------------------
# Propagation steps


def _count_step(store: DomainStore, slots, pred_mask: int, lo: int, hi: int,
                inv_mask: int | None = None) -> Outcome:
    n = len(slots)
    if lo <= 0 and hi >= n:
        return Outcome.NOOP
    if inv_mask is None:
        inv_mask = ~pred_mask
    masks = store.masks
    possible = 0
    forced = 0
    for s in slots:
        m = masks[s]
        if m & pred_mask:
            possible += 1
            if m & inv_mask == 0:
                forced += 1
    if possible < lo or forced > hi:
        return Outcome.FAILED
    if forced >= lo and possible <= hi:
        return Outcome.ENTAILED
    changed = False
    if possible == lo:
        # every slot that can still match must match
        for s in slots:
            if masks[s] & inv_mask and masks[s] & pred_mask:
                changed |= store.restrict(s, pred_mask)
    elif forced == hi:
        # the bound is used up: no other slot may match
        for s in slots:
            if masks[s] & pred_mask and masks[s] & inv_mask:
                changed |= store.restrict(s, inv_mask)
    return Outcome.PRUNED if changed else Outcome.NOOP


class _AttrTable:
    """Per-bank lookup tables for bounds reasoning over one attribute."""

    __slots__ = ("values", "distinct", "le_masks")

    def __init__(self, bank, attr: str):
        self.values = tuple(q.attr(attr) for q in bank.questions)
        self.distinct = tuple(sorted(set(self.values)))
        acc = 0
        le = []
        for v in self.distinct:
            for qid, qv in enumerate(self.values, start=1):
                if qv == v:
                    acc |= 1 << (qid - 1)
            le.append(acc)
        self.le_masks = tuple(le)

    def min_in(self, mask: int) -> int:
        for v, le in zip(self.distinct, self.le_masks):
            if mask & le:
                return v
        raise ModelError("empty domain")

    def max_in(self, mask: int) -> int:
        prev = 0
        result = None
        for v, le in zip(self.distinct, self.le_masks):
            if mask & (le ^ prev):
                result = v
            prev = le
        if result is None:
            raise ModelError("empty domain")
        return result

    def mask_le(self, t) -> int:
        i = bisect_right(self.distinct, t)
        return self.le_masks[i - 1] if i else 0

    def mask_ge(self, t) -> int:
        full = self.le_masks[-1] if self.le_masks else 0
        i = bisect_left(self.distinct, t)
        return full ^ (self.le_masks[i - 1] if i else 0)


def _sum_step(store: DomainStore, slots, table: _AttrTable, lo: int, hi: int) -> Outcome:
    masks = store.masks
    mins = []
    maxs = []
    for s in slots:
        m = masks[s]
        if m == 0:
            return Outcome.FAILED
        mins.append(table.min_in(m))
        maxs.append(table.max_in(m))
    total_min = sum(mins)
    total_max = sum(maxs)
    if total_min > hi or total_max < lo:
        return Outcome.FAILED
    if total_min >= lo and total_max <= hi:
        return Outcome.ENTAILED
    changed = False
    for pos, s in enumerate(slots):
        # value v survives iff v + best-case others stays inside the band
        cap = hi - (total_min - mins[pos])
        floor_ = lo - (total_max - maxs[pos])
        allowed = table.mask_le(cap) & table.mask_ge(floor_)
        changed |= store.restrict(s, allowed)
        if masks[s] == 0:
            return Outcome.FAILED
    return Outcome.PRUNED if changed else Outcome.NOOP


def _choice_step(store: DomainStore, slots, idmask: int) -> Outcome:
    masks = store.masks
    supports = []
    for s in slots:
        m = masks[s]
        if m and m & ~idmask == 0:
            return Outcome.ENTAILED  # some slot is already forced into the set
        if m & idmask:
            supports.append(s)
    if not supports:
        return Outcome.FAILED
    if len(supports) == 1:
        if store.restrict(supports[0], idmask):
            return Outcome.PRUNED
    return Outcome.NOOP


def _alldiff_step(store: DomainStore, slots) -> Outcome:
    masks = store.masks
    changed = False
    pending = True
    while pending:
        pending = False
        taken = 0
        for s in slots:
            m = masks[s]
            if m == 0:
                return Outcome.FAILED
            if m & (m - 1) == 0:
                if taken & m:
                    return Outcome.FAILED  # two slots pinned to the same id
                taken |= m
        if taken:
            for s in slots:
                m = masks[s]
                if m & (m - 1) and m & taken:
                    store.restrict(s, ~taken)
                    changed = True
                    m = masks[s]
                    if m == 0:
                        return Outcome.FAILED
                    if m & (m - 1) == 0:
                        pending = True  # newly pinned: propagate once more
    union = 0
    singletons = 0
    for s in slots:
        m = masks[s]
        union |= m
        if m & (m - 1) == 0:
            singletons += 1
    if union.bit_count() < len(slots):
        return Outcome.FAILED  # pigeonhole: fewer candidate ids than slots
    if singletons == len(slots):
        return Outcome.ENTAILED
    return Outcome.PRUNED if changed else Outcome.NOOP


def _overlap_step(store: DomainStore, slots_a, slots_b, lo: int, hi: int) -> Outcome:
    masks = store.masks
    forced_a = 0
    for s in slots_a:
        m = masks[s]
        if m & (m - 1) == 0:
            forced_a |= m
    forced_b = 0
    for s in slots_b:
        m = masks[s]
        if m & (m - 1) == 0:
            forced_b |= m
    n_forced = (forced_a & forced_b).bit_count()
    if n_forced > hi:
        return Outcome.FAILED
    if lo <= 0:
        # pure upper bound: the union computation below can neither fail
        # nor entail anything new until more slots are pinned
        return Outcome.NOOP
    possible_a = 0
    for s in slots_a:
        possible_a |= masks[s]
    possible_b = 0
    for s in slots_b:
        possible_b |= masks[s]
    n_possible = (possible_a & possible_b).bit_count()
    if n_possible < lo:
        return Outcome.FAILED
    if n_forced >= lo and n_possible <= hi:
        return Outcome.ENTAILED
    return Outcome.NOOP


def _residual_step(store: DomainStore, slots, expr) -> Outcome:
    masks = store.masks
    for s in slots:
        m = masks[s]
        if m == 0:
            return Outcome.FAILED
        if m & (m - 1):
            return Outcome.NOOP
    # all relevant slots decided: evaluate the constraint exactly
    rows = []
    for i in range(store.k):
        row = []
        for j in range(store.l):
            m = masks[i * store.l + j]
            row.append((m & -m).bit_length() if m else 1)
        rows.append(tuple(row))
    conf = MultiConfiguration(tuple(rows))
    ok = evaluate(expr, conf, store.task.bank)
    return Outcome.ENTAILED if ok else Outcome.FAILED


# ---------------------------------------------------------------------------
# Public operations


def init_store(task: MultiConfigTask) -> DomainStore:
    """Fresh store: every slot starts with the full bank, then every unary
    constraint (per-slot filters, zero-cardinality bounds) is applied once."""
    store = DomainStore(task)
    for _cid, atom in _compile_atoms(task):
        if isinstance(atom, _Filter):
            for s in atom.slots:
                store.restrict(s, atom.keep_mask)
    return store


def propagate_count(store: DomainStore, scope, pred: Pred, lo: int, hi: int) -> Outcome:
    """Bounds filtering for `lo <= #{slots in scope matching pred} <= hi`."""
    if lo > hi:
        raise ModelError("count band requires lo <= hi")
    slots = _as_flat(store, scope)
    return _count_step(store, slots, store.task.bank.matching_mask(pred), lo, hi)


def propagate_sum(store: DomainStore, instance: int, attr: str, lo: int, hi: int) -> Outcome:
    """Bounds filtering for `lo <= sum of attr over an instance's slots <= hi`."""
    if lo > hi:
        raise ModelError("sum band requires lo <= hi")
    slots = _as_flat(store, Scope.of(instance))
    return _sum_step(store, slots, _AttrTable(store.task.bank, attr), lo, hi)


def propagate_choice(store: DomainStore, instance: int, idset: Iterable[int]) -> Outcome:
    """At least one slot of the instance takes an id from idset."""
    ids = set(idset)
    if not ids:
        raise ModelError("choice over an empty id set")
    slots = _as_flat(store, Scope.of(instance))
    return _choice_step(store, slots, _mask_of(ids))


def propagate_alldiff(store: DomainStore, instance: int) -> Outcome:
    """Slot values within the instance are pairwise distinct: singleton
    elimination plus a whole-instance pigeonhole check."""
    slots = _as_flat(store, Scope.of(instance))
    return _alldiff_step(store, slots)


def _as_flat(store: DomainStore, scope) -> tuple[int, ...]:
    if isinstance(scope, Scope):
        return _scope_flat(scope, store.k, store.l)
    return tuple(store.idx(i, j) for i, j in scope)


@dataclass(frozen=True)
class Propagator:
    """A compiled filtering procedure watching a fixed set of slots.

    ``once`` marks filters whose effect survives any later domain shrink
    (per-slot value removal): they run in full fixpoints but are never
    re-triggered by slot changes.
    """

    cid: str
    watch: tuple[int, ...]
    step: Callable[[DomainStore], Outcome]
    once: bool = False


def _compile_atoms(task: MultiConfigTask) -> list[tuple[str, object]]:
    out = []
    for cid, expr in task.entries():
        for atom in _atoms_of(expr, task):
            out.append((cid, atom))
    return out


def compile_propagators(task: MultiConfigTask) -> tuple[Propagator, ...]:
    """All runtime propagators for a task, one or more per constraint.

    Unary filters are included (cheap and idempotent) so a fixpoint from any
    store state enforces them; constraints outside the filtered classes get
    a leaf checker that evaluates the exact semantics once its slots are
    decided.
    """
    bank = task.bank
    tables: dict[str, _AttrTable] = {}
    props: list[Propagator] = []
    for cid, atom in _compile_atoms(task):
        if isinstance(atom, _Filter):
            props.append(Propagator(cid, atom.slots, _make_filter_step(atom), once=True))
        elif isinstance(atom, _CountBand):
            props.append(Propagator(cid, atom.slots, _make_count_step(atom)))
        elif isinstance(atom, _SumBand):
            table = tables.get(atom.attr)
            if table is None:
                table = tables[atom.attr] = _AttrTable(bank, atom.attr)
            props.append(Propagator(cid, atom.slots, _make_sum_step(atom, table)))
        elif isinstance(atom, _Choice):
            props.append(Propagator(cid, atom.slots, _make_choice_step(atom)))
        elif isinstance(atom, _AllDiff):
            props.append(Propagator(cid, atom.slots, _make_alldiff_step(atom)))
        elif isinstance(atom, _OverlapBand):
            props.append(Propagator(cid, atom.slots_a + atom.slots_b,
                                    _make_overlap_step(atom)))
        elif isinstance(atom, _Residual):
            props.append(Propagator(cid, atom.slots, _make_residual_step(atom)))
        elif isinstance(atom, _AlwaysFalse):
            props.append(Propagator(cid, atom.slots, lambda store: Outcome.FAILED))
    return tuple(props)


def _make_filter_step(atom: _Filter):
    slots, keep = atom.slots, atom.keep_mask
    drop = ~keep

    def step(store: DomainStore) -> Outcome:
        masks = store.masks
        changed = False
        for s in slots:
            if masks[s] & drop:
                store.restrict(s, keep)
                changed = True
                if masks[s] == 0:
                    return Outcome.FAILED
        return Outcome.PRUNED if changed else Outcome.ENTAILED
    return step


def _make_count_step(atom: _CountBand):
    slots, pred_mask, lo, hi = atom.slots, atom.pred_mask, atom.lo, atom.hi
    inv_mask = ~pred_mask

    def step(store: DomainStore) -> Outcome:
        return _count_step(store, slots, pred_mask, lo, hi, inv_mask)
    return step


def _make_sum_step(atom: _SumBand, table: _AttrTable):
    def step(store: DomainStore) -> Outcome:
        return _sum_step(store, atom.slots, table, atom.lo, atom.hi)
    return step


def _make_choice_step(atom: _Choice):
    def step(store: DomainStore) -> Outcome:
        return _choice_step(store, atom.slots, atom.idmask)
    return step


def _make_alldiff_step(atom: _AllDiff):
    def step(store: DomainStore) -> Outcome:
        return _alldiff_step(store, atom.slots)
    return step


def _make_overlap_step(atom: _OverlapBand):
    def step(store: DomainStore) -> Outcome:
        return _overlap_step(store, atom.slots_a, atom.slots_b, atom.lo, atom.hi)
    return step


def _make_residual_step(atom: _Residual):
    def step(store: DomainStore) -> Outcome:
        return _residual_step(store, atom.slots, atom.expr)
    return step


class PropagatorSet:
    """Propagators plus their slot->watcher index, built once and shared by
    every fixpoint over stores of the same task."""

    __slots__ = ("props", "steps", "watchers")

    def __init__(self, propagators: Sequence[Propagator]):
        self.props = tuple(propagators)
        self.steps = tuple(p.step for p in self.props)
        watchers: dict[int, list[int]] = {}
        for pi, prop in enumerate(self.props):
            if prop.once:
                continue
            for s in prop.watch:
                watchers.setdefault(s, []).append(pi)
        self.watchers = watchers

    def fixpoint(self, store: DomainStore,
                 dirty: Iterable[int] | None = None) -> FixpointResult:
        steps = self.steps
        watchers = self.watchers
        queued = bytearray(len(steps))
        queue: deque[int] = deque()

        if dirty is None:
            if store.is_failed:
                return FixpointResult.FAILED
            queue.extend(range(len(steps)))
            for pi in range(len(steps)):
                queued[pi] = 1
        else:
            for s in dirty:
                if store.masks[s] == 0:
                    return FixpointResult.FAILED
                for pi in watchers.get(s, ()):
                    if not queued[pi]:
                        queued[pi] = 1
                        queue.append(pi)
        store.changed.clear()

        masks = store.masks
        changed = store.changed
        while queue:
            pi = queue.popleft()
            queued[pi] = 0
            if steps[pi](store) is Outcome.FAILED:
                return FixpointResult.FAILED
            if changed:
                for s in changed:
                    if masks[s] == 0:
                        return FixpointResult.FAILED
                    for pj in watchers.get(s, ()):
                        if not queued[pj]:
                            queued[pj] = 1
                            queue.append(pj)
                del changed[:]
        return FixpointResult.STABLE


def fixpoint(store: DomainStore, propagators: Sequence[Propagator],
             dirty: Iterable[int] | None = None) -> FixpointResult:
    """Run propagators to a stable state.

    With ``dirty`` None every propagator runs at least once; otherwise only
    those watching a dirty slot are scheduled initially.  Monotone filters
    make the result independent of scheduling order.
    """
    return PropagatorSet(propagators).fixpoint(store, dirty)
