"""Data model for multi-instance configuration tasks.

A task configures k instances of one product type at once.  Each instance is
a row of l slots, every slot holding one question id drawn from a shared
bank, and constraints may range over single instances or across instances.
This module defines the bank, the constraint expression language, and the
reference evaluator that decides whether a complete assignment satisfies an
expression.  All types are immutable after construction and safe to share
between workers; evaluation is pure.

Fractions of an instance's slots ("share" terms) are computed as exact
rationals, never floats: whether 8 of 50 slots meets a 16% floor must not
depend on rounding.
"""

from __future__ import annotations

import operator as _operator
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from typing import Iterator, Mapping, Sequence, Union


class ModelError(ValueError):
    """An authoring error in a bank, expression, constraint, or task."""


ATTRS = ("id", "qtype", "level", "duration")

# Instance placeholders, resolved by the enclosing quantifier node.
CURRENT = "current"            # bound by ForAllInstances
PAIR_FIRST = "pair_first"      # bound by PairwiseInstances
PAIR_SECOND = "pair_second"

_PLACEHOLDERS = (CURRENT, PAIR_FIRST, PAIR_SECOND)

InstanceRef = Union[int, str]
Rational = Union[int, Fraction]

_OPS = {
    "<=": _operator.le,
    "<": _operator.lt,
    "==": _operator.eq,
    "!=": _operator.ne,
    ">": _operator.gt,
    ">=": _operator.ge,
}
_OP_ALIASES = {"=": "==", "≤": "<=", "≥": ">=", "≠": "!="}


def canon_op(op: str) -> str:
    op = _OP_ALIASES.get(op, op)
    if op not in _OPS:
        raise ModelError(f"unknown comparison operator {op!r}")
    return op


def as_rational(value) -> Rational:
    """Coerce a threshold to an exact number.

    Accepts ints, Fractions, and strings such as "3/10" or "0.16" (parsed
    exactly).  Floats are rejected outright: float(0.3) is not 3/10, and a
    share bound that drifts by 2**-54 can silently flip feasibility.
    """
    if isinstance(value, bool):
        raise ModelError("expected a number, got a bool")
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else value
    if isinstance(value, str):
        try:
            frac = Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ModelError(f"cannot parse rational {value!r}: {exc}") from None
        return int(frac) if frac.denominator == 1 else frac
    if isinstance(value, float):
        raise ModelError(
            f"floating-point threshold {value!r} is not exact; "
            f"write it as a ratio string such as \"3/10\""
        )
    raise ModelError(f"expected a number, got {type(value).__name__}")


# ---------------------------------------------------------------------------
# Bank


@dataclass(frozen=True)
class Question:
    """One configurable component: a bank question.

    ``qtype`` is the question category in 1..q_bar, ``level`` the complexity
    in 1..r, ``duration`` the estimated answering time in whole minutes.
    """

    id: int
    qtype: int
    level: int
    duration: int

    def __post_init__(self):
        for name in ("id", "qtype", "level", "duration"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ModelError(f"question {name} must be a positive integer, got {v!r}")

    def attr(self, name: str) -> int:
        if name not in ATTRS:
            raise ModelError(f"unknown attribute {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class QuestionBank:
    """The finite universe of questions; ids are dense in 1..p.

    ``q_bar`` and ``r`` declare the category and level ranges; they may
    exceed the maxima observed in ``questions`` (a category may be declared
    but unused) but never undercut them.
    """

    questions: tuple[Question, ...]
    q_bar: int
    r: int

    def __post_init__(self):
        qs = tuple(self.questions)
        ids = sorted(q.id for q in qs)
        if ids != list(range(1, len(qs) + 1)):
            dupes = {i for i in ids if ids.count(i) > 1}
            if dupes:
                raise ModelError(f"duplicate question ids {sorted(dupes)}")
            raise ModelError(
                f"question ids must be exactly 1..{len(qs)}, got {ids}"
            )
        object.__setattr__(self, "questions", tuple(sorted(qs, key=lambda q: q.id)))
        if qs:
            if self.q_bar < max(q.qtype for q in qs):
                raise ModelError("q_bar is below an observed question type")
            if self.r < max(q.level for q in qs):
                raise ModelError("r is below an observed question level")
        if self.q_bar < 0 or self.r < 0:
            raise ModelError("q_bar and r must be non-negative")

    @classmethod
    def from_questions(cls, questions: Sequence[Question],
                       q_bar: int | None = None, r: int | None = None) -> QuestionBank:
        """Build a bank, inferring q_bar / r from the data when omitted."""
        qs = tuple(questions)
        if q_bar is None:
            q_bar = max((q.qtype for q in qs), default=0)
        if r is None:
            r = max((q.level for q in qs), default=0)
        return cls(qs, q_bar, r)

    @property
    def p(self) -> int:
        return len(self.questions)

    def question(self, qid: int) -> Question:
        if not 1 <= qid <= self.p:
            raise ModelError(f"question id {qid} outside bank 1..{self.p}")
        return self.questions[qid - 1]

    @cached_property
    def _pred_masks(self) -> dict:
        return {}

    def matching_ids(self, pred: Pred) -> frozenset[int]:
        """Ids of all bank questions satisfying the predicate (memoized)."""
        cached = self._pred_masks.get(pred)
        if cached is None:
            cached = frozenset(q.id for q in self.questions if pred.matches(q))
            self._pred_masks[pred] = cached
        return cached

    def matching_mask(self, pred: Pred) -> int:
        """Same as matching_ids, as a bitmask with bit (id-1) set."""
        mask = 0
        for qid in self.matching_ids(pred):
            mask |= 1 << (qid - 1)
        return mask


# ---------------------------------------------------------------------------
# Predicates: per-question decidable tests used by Count / Share terms.


@dataclass(frozen=True)
class AttrIn:
    """attribute value is a member of a literal set."""

    attr: str
    values: frozenset[int]

    def __post_init__(self):
        if self.attr not in ATTRS:
            raise ModelError(f"unknown attribute {self.attr!r}")
        object.__setattr__(self, "values", frozenset(int(v) for v in self.values))
        if not self.values:
            raise ModelError("empty value set in predicate")

    def matches(self, q: Question) -> bool:
        return q.attr(self.attr) in self.values


@dataclass(frozen=True)
class AttrCmp:
    """attribute value compared against a literal."""

    attr: str
    op: str
    value: int

    def __post_init__(self):
        if self.attr not in ATTRS:
            raise ModelError(f"unknown attribute {self.attr!r}")
        object.__setattr__(self, "op", canon_op(self.op))
        if not isinstance(self.value, int) or isinstance(self.value, bool):
            raise ModelError("predicate comparison value must be an integer")

    def matches(self, q: Question) -> bool:
        return _OPS[self.op](q.attr(self.attr), self.value)


Pred = Union[AttrIn, AttrCmp]


# ---------------------------------------------------------------------------
# Expression language


@dataclass(frozen=True)
class Scope:
    """A set of slots: those of the listed instances, or all slots when
    ``instances`` is None.  Entries may be concrete indices or placeholders
    bound by an enclosing quantifier."""

    instances: tuple[InstanceRef, ...] | None = None

    def __post_init__(self):
        if self.instances is not None:
            refs = tuple(dict.fromkeys(self.instances))
            if not refs:
                raise ModelError("scope must name at least one instance")
            for ref in refs:
                _check_ref(ref)
            object.__setattr__(self, "instances", refs)

    @classmethod
    def of(cls, *instances: InstanceRef) -> Scope:
        return cls(tuple(instances))


ALL_SLOTS = Scope(None)


def _check_ref(ref: InstanceRef) -> None:
    if isinstance(ref, bool) or not isinstance(ref, (int, str)):
        raise ModelError(f"bad instance reference {ref!r}")
    if isinstance(ref, int) and ref < 1:
        raise ModelError(f"instance index must be >= 1, got {ref}")
    if isinstance(ref, str) and ref not in _PLACEHOLDERS:
        raise ModelError(f"unknown instance placeholder {ref!r}")


@dataclass(frozen=True)
class Lit:
    """Literal integer or exact rational."""

    value: Rational

    def __post_init__(self):
        object.__setattr__(self, "value", as_rational(self.value))


@dataclass(frozen=True)
class AttrRef:
    """Attribute of the slot under evaluation; only valid inside the body of
    a ForAllSlots node."""

    attr: str

    def __post_init__(self):
        if self.attr not in ATTRS:
            raise ModelError(f"unknown attribute {self.attr!r}")


@dataclass(frozen=True)
class Count:
    """Number of slots in scope whose assigned question satisfies pred."""

    scope: Scope
    pred: Pred


@dataclass(frozen=True)
class Sum:
    """Sum of a numeric attribute over the scope's assigned questions."""

    scope: Scope
    attr: str

    def __post_init__(self):
        if self.attr not in ATTRS:
            raise ModelError(f"unknown attribute {self.attr!r}")


@dataclass(frozen=True)
class Share:
    """Count / |scope| as an exact rational."""

    scope: Scope
    pred: Pred


@dataclass(frozen=True)
class Overlap:
    """Number of distinct question ids assigned in both instances."""

    first: InstanceRef
    second: InstanceRef

    def __post_init__(self):
        _check_ref(self.first)
        _check_ref(self.second)


Term = Union[Lit, AttrRef, Count, Sum, Share, Overlap]


@dataclass(frozen=True)
class Compare:
    op: str
    lhs: Term
    rhs: Term

    def __post_init__(self):
        object.__setattr__(self, "op", canon_op(self.op))


@dataclass(frozen=True)
class And:
    args: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Or:
    args: tuple[Expr, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Not:
    arg: Expr


@dataclass(frozen=True)
class ForAllInstances:
    """Body replicated for every instance; CURRENT in the body is bound to
    the instance index."""

    body: Expr


@dataclass(frozen=True)
class ForAllSlots:
    """Body replicated for every slot in scope; AttrRef in the body resolves
    against that slot's assigned question."""

    scope: Scope
    body: Expr


@dataclass(frozen=True)
class PairwiseInstances:
    """Body replicated for every unordered pair of distinct instances;
    PAIR_FIRST / PAIR_SECOND in the body are bound to the pair."""

    body: Expr


@dataclass(frozen=True)
class AllDifferentSlots:
    """Slot values within one instance are pairwise distinct."""

    instance: InstanceRef

    def __post_init__(self):
        _check_ref(self.instance)


Expr = Union[
    Compare, And, Or, Not,
    ForAllInstances, ForAllSlots, PairwiseInstances, AllDifferentSlots,
]

_QUANTIFIERS = (ForAllInstances, ForAllSlots, PairwiseInstances)


def iter_nodes(expr) -> Iterator:
    """Yield every node of an expression tree, including terms and preds."""
    stack = [expr]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, (And, Or)):
            stack.extend(node.args)
        elif isinstance(node, Not):
            stack.append(node.arg)
        elif isinstance(node, Compare):
            stack.append(node.lhs)
            stack.append(node.rhs)
        elif isinstance(node, (ForAllInstances, PairwiseInstances)):
            stack.append(node.body)
        elif isinstance(node, ForAllSlots):
            stack.append(node.body)
        elif isinstance(node, (Count, Share)):
            stack.append(node.pred)


# ---------------------------------------------------------------------------
# Requirements, constraints, tasks


@dataclass(frozen=True)
class Owner:
    """Who authored a requirement: a specific examinee or the instructor."""

    kind: str
    index: int | None = None

    def __post_init__(self):
        if self.kind not in ("examinee", "instructor"):
            raise ModelError(f"unknown owner kind {self.kind!r}")
        if self.kind == "examinee":
            if not isinstance(self.index, int) or self.index < 1:
                raise ModelError("examinee owner needs an index >= 1")
        elif self.index is not None:
            raise ModelError("instructor owner carries no index")

    @classmethod
    def examinee(cls, index: int) -> Owner:
        return cls("examinee", index)

    @classmethod
    def instructor(cls) -> Owner:
        return cls("instructor")

    def __str__(self) -> str:
        return self.kind if self.index is None else f"{self.kind} {self.index}"


@dataclass(frozen=True)
class Requirement:
    """A user-authored constraint, diagnosable when infeasibility arises."""

    id: str
    owner: Owner
    expr: Expr
    label: str = ""


@dataclass(frozen=True)
class Constraint:
    """A global model constraint."""

    id: str
    expr: Expr
    label: str = ""


@dataclass(frozen=True)
class SlotVar:
    """One slot variable: question position ``slot`` of instance ``instance``."""

    instance: int
    slot: int


@dataclass(frozen=True)
class MultiConfigTask:
    """A k-instance configuration task over a shared bank.

    The induced variable set has one slot variable per (instance, slot) pair,
    each ranging over the bank ids 1..p.  ``requirements`` is the diagnosable
    user-requirement set, ``constraints`` the model constraint set; the
    evaluator treats both identically.
    """

    bank: QuestionBank
    k: int
    l: int
    requirements: tuple[Requirement, ...]
    constraints: tuple[Constraint, ...]

    @property
    def num_slots(self) -> int:
        return self.k * self.l

    def slot_vars(self) -> list[SlotVar]:
        return [SlotVar(i, j) for i in range(1, self.k + 1) for j in range(1, self.l + 1)]

    def entries(self) -> Iterator[tuple[str, Expr]]:
        """(id, expr) pairs over REQ then C, in declaration order."""
        for req in self.requirements:
            yield req.id, req.expr
        for con in self.constraints:
            yield con.id, con.expr

    @cached_property
    def _by_id(self) -> Mapping[str, Expr]:
        return {cid: expr for cid, expr in self.entries()}

    def expr_of(self, cid: str) -> Expr:
        try:
            return self._by_id[cid]
        except KeyError:
            raise ModelError(f"unknown constraint id {cid!r}") from None

    def restricted(self, ids) -> MultiConfigTask:
        """The same task keeping only the requirements/constraints in ids."""
        keep = set(ids)
        unknown = keep - set(self._by_id)
        if unknown:
            raise ModelError(f"unknown constraint ids {sorted(unknown)}")
        return MultiConfigTask(
            bank=self.bank,
            k=self.k,
            l=self.l,
            requirements=tuple(r for r in self.requirements if r.id in keep),
            constraints=tuple(c for c in self.constraints if c.id in keep),
        )

    @cached_property
    def uniqueness_instances(self) -> frozenset[int]:
        """Instances governed by an AllDifferentSlots constraint."""
        found: set[int] = set()
        for _, expr in self.entries():
            for node in iter_nodes(expr):
                if isinstance(node, AllDifferentSlots):
                    if isinstance(node.instance, int):
                        found.add(node.instance)
                    else:
                        # placeholder: bound by a quantifier over instances,
                        # so uniqueness covers every instance
                        found.update(range(1, self.k + 1))
        return frozenset(found)


def build_task(bank: QuestionBank, k: int, l: int,
               reqs: Sequence[Requirement] = (),
               cons: Sequence = ()) -> MultiConfigTask:
    """Assemble and validate a task.

    ``cons`` entries may be Constraint objects or bare (id, expr) pairs.
    Rejects empty banks, duplicate constraint ids, predicates referencing a
    category above q_bar or a level above r, and l > p when per-instance
    uniqueness is active (pigeonhole: the instance could never be filled).
    """
    if bank.p == 0:
        raise ModelError("empty bank: a task needs at least one question")
    if not isinstance(k, int) or not isinstance(l, int) or k < 1 or l < 1:
        raise ModelError("k and l must be integers >= 1")

    norm_cons = []
    for entry in cons:
        if isinstance(entry, Constraint):
            norm_cons.append(entry)
        else:
            cid, expr = entry
            norm_cons.append(Constraint(str(cid), expr))

    ids = [r.id for r in reqs] + [c.id for c in norm_cons]
    seen: set[str] = set()
    for cid in ids:
        if cid in seen:
            raise ModelError(f"duplicate constraint id {cid!r}")
        seen.add(cid)

    task = MultiConfigTask(bank, k, l, tuple(reqs), tuple(norm_cons))
    for cid, expr in task.entries():
        try:
            _validate_expr(expr, bank, k)
        except ModelError as exc:
            raise ModelError(f"constraint {cid!r}: {exc}") from None

    if task.uniqueness_instances and l > bank.p:
        raise ModelError(
            f"l exceeds p under uniqueness: {l} distinct slots cannot be "
            f"filled from {bank.p} questions"
        )
    return task


_ATTR_UPPER = {"qtype": "q_bar", "level": "r", "id": "p"}


def _attr_bound(bank: QuestionBank, attr: str) -> int | None:
    if attr == "qtype":
        return bank.q_bar
    if attr == "level":
        return bank.r
    if attr == "id":
        return bank.p
    return None  # duration has no declared upper bound


def _check_attr_literal(bank: QuestionBank, attr: str, value: int) -> None:
    upper = _attr_bound(bank, attr)
    if upper is not None and not 1 <= value <= upper:
        raise ModelError(
            f"predicate references {attr}={value} outside 1..{upper} "
            f"({_ATTR_UPPER[attr]})"
        )
    if attr == "duration" and value < 0:
        raise ModelError("negative duration literal")


def _validate_expr(expr, bank: QuestionBank, k: int) -> None:
    """Reject out-of-range attribute literals, bad instance indices, and
    placeholders used outside their binding quantifier."""

    def refs_ok(refs, bound):
        for ref in refs:
            if isinstance(ref, int):
                if ref > k:
                    raise ModelError(f"instance {ref} out of range 1..{k}")
            elif ref not in bound:
                raise ModelError(f"placeholder {ref!r} used outside its quantifier")

    def visit(node, bound: frozenset[str]):
        if isinstance(node, (And, Or)):
            for a in node.args:
                visit(a, bound)
        elif isinstance(node, Not):
            visit(node.arg, bound)
        elif isinstance(node, Compare):
            visit(node.lhs, bound)
            visit(node.rhs, bound)
            # attribute-vs-literal comparisons get the same range check as
            # set-membership predicates
            for a, b in ((node.lhs, node.rhs), (node.rhs, node.lhs)):
                if isinstance(a, AttrRef) and isinstance(b, Lit) and isinstance(b.value, int):
                    _check_attr_literal(bank, a.attr, b.value)
        elif isinstance(node, ForAllInstances):
            visit(node.body, bound | {CURRENT})
        elif isinstance(node, PairwiseInstances):
            visit(node.body, bound | {PAIR_FIRST, PAIR_SECOND})
        elif isinstance(node, ForAllSlots):
            if node.scope.instances is not None:
                refs_ok(node.scope.instances, bound)
            visit(node.body, bound)
        elif isinstance(node, AllDifferentSlots):
            refs_ok((node.instance,), bound)
        elif isinstance(node, (Count, Share)):
            if node.scope.instances is not None:
                refs_ok(node.scope.instances, bound)
            pred = node.pred
            if isinstance(pred, AttrIn):
                for v in pred.values:
                    _check_attr_literal(bank, pred.attr, v)
            elif isinstance(pred, AttrCmp):
                _check_attr_literal(bank, pred.attr, pred.value)
        elif isinstance(node, Sum):
            if node.scope.instances is not None:
                refs_ok(node.scope.instances, bound)
        elif isinstance(node, Overlap):
            refs_ok((node.first, node.second), bound)
        elif isinstance(node, (Lit, AttrRef)):
            pass
        else:
            raise ModelError(f"unknown expression node {type(node).__name__}")

    visit(expr, frozenset())


# ---------------------------------------------------------------------------
# Configurations and the evaluator


@dataclass(frozen=True)
class MultiConfiguration:
    """A complete assignment: exams[i-1][j-1] is the question id in slot j
    of instance i."""

    exams: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.exams)
        if not rows or not rows[0]:
            raise ModelError("a configuration needs at least one slot")
        width = len(rows[0])
        for row in rows:
            if len(row) != width:
                raise ModelError("ragged configuration: instances differ in slot count")
            for qid in row:
                if not isinstance(qid, int) or isinstance(qid, bool) or qid < 1:
                    raise ModelError(f"bad question id {qid!r} in configuration")
        object.__setattr__(self, "exams", rows)

    @classmethod
    def from_assignment(cls, assignment: Mapping[tuple[int, int], int]) -> MultiConfiguration:
        """Build from a total (instance, slot) -> id map; rejects gaps."""
        if not assignment:
            raise ModelError("empty assignment")
        k = max(i for i, _ in assignment)
        l = max(j for _, j in assignment)
        rows = []
        for i in range(1, k + 1):
            row = []
            for j in range(1, l + 1):
                if (i, j) not in assignment:
                    raise ModelError(f"assignment is not total: missing slot ({i}, {j})")
                row.append(assignment[(i, j)])
            rows.append(tuple(row))
        return cls(tuple(rows))

    @property
    def k(self) -> int:
        return len(self.exams)

    @property
    def l(self) -> int:
        return len(self.exams[0])

    def value(self, instance: int, slot: int) -> int:
        return self.exams[instance - 1][slot - 1]

    def assignment(self) -> dict[tuple[int, int], int]:
        return {
            (i + 1, j + 1): qid
            for i, row in enumerate(self.exams)
            for j, qid in enumerate(row)
        }

    def instance_ids(self, instance: int) -> frozenset[int]:
        return frozenset(self.exams[instance - 1])


class _Eval:
    """One evaluation pass of an expression against a configuration."""

    __slots__ = ("conf", "bank", "k", "l")

    def __init__(self, conf: MultiConfiguration, bank: QuestionBank):
        self.conf = conf
        self.bank = bank
        self.k = conf.k
        self.l = conf.l

    def instance(self, ref: InstanceRef, env: Mapping) -> int:
        if isinstance(ref, int):
            i = ref
        else:
            try:
                i = env[ref]
            except KeyError:
                raise ModelError(f"placeholder {ref!r} is unbound here") from None
        if not 1 <= i <= self.k:
            raise ModelError(f"instance {i} out of range 1..{self.k}")
        return i

    def slots(self, scope: Scope, env: Mapping) -> list[tuple[int, int]]:
        if scope.instances is None:
            insts: Sequence[int] = range(1, self.k + 1)
        else:
            # placeholders may resolve to the same concrete instance; a scope
            # is a set of instances' slots, so deduplicate
            insts = list(dict.fromkeys(self.instance(ref, env) for ref in scope.instances))
        return [(i, j) for i in insts for j in range(1, self.l + 1)]

    def num(self, term, env: Mapping) -> Rational:
        if isinstance(term, Lit):
            return term.value
        if isinstance(term, AttrRef):
            q = env.get("__question__")
            if q is None:
                raise ModelError("attribute reference outside a per-slot body")
            return q.attr(term.attr)
        if isinstance(term, Count):
            ids = self.bank.matching_ids(term.pred)
            return sum(
                1 for i, j in self.slots(term.scope, env)
                if self.conf.value(i, j) in ids
            )
        if isinstance(term, Sum):
            return sum(
                self.bank.question(self.conf.value(i, j)).attr(term.attr)
                for i, j in self.slots(term.scope, env)
            )
        if isinstance(term, Share):
            slots = self.slots(term.scope, env)
            ids = self.bank.matching_ids(term.pred)
            count = sum(1 for i, j in slots if self.conf.value(i, j) in ids)
            share = Fraction(count, len(slots))
            return int(share) if share.denominator == 1 else share
        if isinstance(term, Overlap):
            a = self.instance(term.first, env)
            b = self.instance(term.second, env)
            return len(self.conf.instance_ids(a) & self.conf.instance_ids(b))
        raise ModelError(f"not a numeric term: {type(term).__name__}")

    def truth(self, expr, env: Mapping) -> bool:
        if isinstance(expr, Compare):
            return _OPS[expr.op](self.num(expr.lhs, env), self.num(expr.rhs, env))
        if isinstance(expr, And):
            return all(self.truth(a, env) for a in expr.args)
        if isinstance(expr, Or):
            return any(self.truth(a, env) for a in expr.args)
        if isinstance(expr, Not):
            return not self.truth(expr.arg, env)
        if isinstance(expr, ForAllInstances):
            return all(
                self.truth(expr.body, {**env, CURRENT: i})
                for i in range(1, self.k + 1)
            )
        if isinstance(expr, PairwiseInstances):
            return all(
                self.truth(expr.body, {**env, PAIR_FIRST: a, PAIR_SECOND: b})
                for a, b in combinations(range(1, self.k + 1), 2)
            )
        if isinstance(expr, ForAllSlots):
            for i, j in self.slots(expr.scope, env):
                q = self.bank.question(self.conf.value(i, j))
                if not self.truth(expr.body, {**env, "__question__": q}):
                    return False
            return True
        if isinstance(expr, AllDifferentSlots):
            i = self.instance(expr.instance, env)
            row = self.conf.exams[i - 1]
            return len(set(row)) == len(row)
        raise ModelError(f"not a boolean expression: {type(expr).__name__}")


def evaluate(expr, conf: MultiConfiguration, bank: QuestionBank) -> bool:
    """Truth value of ``expr`` on a complete assignment, attributes resolved
    through the bank.  Pure; share terms use exact rationals."""
    for row in conf.exams:
        for qid in row:
            if qid > bank.p:
                raise ModelError(f"configuration uses id {qid} outside bank 1..{bank.p}")
    return _Eval(conf, bank).truth(expr, {})


def violated_ids(conf: MultiConfiguration, task: MultiConfigTask) -> list[str]:
    """Ids of all requirements/constraints the configuration violates."""
    if conf.k != task.k or conf.l != task.l:
        raise ModelError(
            f"configuration shape {conf.k}x{conf.l} does not match task "
            f"{task.k}x{task.l}"
        )
    ev = _Eval(conf, task.bank)
    for row in conf.exams:
        for qid in row:
            if qid > task.bank.p:
                raise ModelError(f"configuration uses id {qid} outside bank 1..{task.bank.p}")
    return [cid for cid, expr in task.entries() if not ev.truth(expr, {})]


def is_consistent(conf: MultiConfiguration, task: MultiConfigTask) -> bool:
    """True iff the configuration satisfies every requirement and constraint."""
    if conf.k != task.k or conf.l != task.l:
        raise ModelError(
            f"configuration shape {conf.k}x{conf.l} does not match task "
            f"{task.k}x{task.l}"
        )
    ev = _Eval(conf, task.bank)
    for row in conf.exams:
        for qid in row:
            if qid > task.bank.p:
                raise ModelError(f"configuration uses id {qid} outside bank 1..{task.bank.p}")
    return all(ev.truth(expr, {}) for _, expr in task.entries())
