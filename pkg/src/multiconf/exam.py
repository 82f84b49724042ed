"""Exam-assembly adapter: bank ingestion, constraint templates, reports.

Templates are the named constraint forms an exam model is written in
(share caps, type exclusions, usage caps, duration bands, overlap bounds,
...).  Each instantiated template keeps its tag, parameters, and owner so
that validation and diagnosis output can name constraints the way the model
author wrote them rather than as expression trees.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .model import (
    ALL_SLOTS,
    AllDifferentSlots,
    And,
    AttrIn,
    AttrRef,
    Compare,
    Constraint,
    Count,
    CURRENT,
    ForAllInstances,
    ForAllSlots,
    Lit,
    ModelError,
    MultiConfigTask,
    MultiConfiguration,
    Overlap,
    Owner,
    PAIR_FIRST,
    PAIR_SECOND,
    PairwiseInstances,
    QuestionBank,
    Question,
    Requirement,
    Scope,
    Share,
    Sum,
    as_rational,
    build_task,
    violated_ids,
)
from .propagate import share_count_band

TEMPLATE_TAGS = (
    "share_max",
    "exclude_type",
    "usage_cap",
    "require_one_of",
    "min_level",
    "min_type_count",
    "duration",
    "share_range",
    "unique_per_exam",
    "pairwise_overlap",
)


class BankLoadError(ModelError):
    """A malformed question-bank file; messages carry row numbers."""


@dataclass(frozen=True)
class Template:
    """One instantiated constraint template with provenance."""

    tag: str
    params: Mapping
    owner: Owner | None = None
    id: str | None = None

    def __post_init__(self):
        if self.tag not in TEMPLATE_TAGS:
            raise ModelError(f"unknown template tag {self.tag!r}")

    def describe(self) -> str:
        inner = ", ".join(f"{k}={_fmt(v)}" for k, v in self.params.items())
        who = f" [{self.owner}]" if self.owner is not None else ""
        return f"{self.tag}({inner}){who}"


def _fmt(value) -> str:
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, (tuple, frozenset)):
        return "{" + ", ".join(str(v) for v in sorted(value)) + "}"
    return str(value)


def _bounded_rational(value, name: str) -> Fraction | int:
    b = as_rational(value)
    if not 0 <= b <= 1:
        raise ModelError(f"{name} must lie in [0, 1], got {_fmt(b)}")
    return b


def _positive_int(value, name: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ModelError(f"{name} must be a positive integer, got {value!r}")
    return value


def _instance_or_none(instance, name: str = "instance"):
    if instance is None:
        return None
    return _positive_int(instance, name)


# --- template constructors -------------------------------------------------

def tmpl_share_max(owner: Owner | None, instance: int, categories: Iterable[int],
                   bound) -> Template:
    """At most ``bound`` of the instance's slots may hold a question whose
    category is in ``categories``."""
    cats = tuple(sorted(set(categories)))
    if not cats:
        raise ModelError("share_max with no categories is vacuous; "
                         "probably an authoring error")
    return Template("share_max", {
        "instance": _positive_int(instance, "instance"),
        "categories": cats,
        "bound": _bounded_rational(bound, "bound"),
    }, owner=owner)


def tmpl_exclude_type(owner: Owner | None, instance: int | None, category: int) -> Template:
    """No question of the category, in one instance or (None) everywhere."""
    return Template("exclude_type", {
        "instance": _instance_or_none(instance),
        "category": _positive_int(category, "category"),
    }, owner=owner)


def tmpl_usage_cap(question_id: int, max_count: int) -> Template:
    """The question appears in at most ``max_count`` slots across all exams
    (equals exam count when per-exam uniqueness is active)."""
    if not isinstance(max_count, int) or max_count < 0:
        raise ModelError("max_count must be a non-negative integer")
    return Template("usage_cap", {
        "question": _positive_int(question_id, "question"),
        "max_count": max_count,
    })


def tmpl_require_one_of(questions: Iterable[int]) -> Template:
    """Every exam must contain at least one of the listed questions."""
    ids = tuple(sorted(set(questions)))
    if not ids:
        raise ModelError("require_one_of needs at least one question id")
    return Template("require_one_of", {"questions": ids})


def tmpl_min_level(min_level: int) -> Template:
    """Every slot everywhere holds a question of at least this level."""
    return Template("min_level", {"min_level": _positive_int(min_level, "min_level")})


def tmpl_min_type_count(category: int, min_count: int) -> Template:
    """Every exam holds at least ``min_count`` questions of the category."""
    if not isinstance(min_count, int) or min_count < 0:
        raise ModelError("min_count must be a non-negative integer")
    return Template("min_type_count", {
        "category": _positive_int(category, "category"),
        "min_count": min_count,
    })


def tmpl_duration(instance: int | None, lo: int, hi: int) -> Template:
    """Total duration of one exam (or of every exam when instance is None)
    falls in [lo, hi] minutes; exact-duration models use lo == hi."""
    if not isinstance(lo, int) or not isinstance(hi, int) or lo < 0 or hi < lo:
        raise ModelError("duration band needs integers 0 <= lo <= hi")
    return Template("duration", {
        "instance": _instance_or_none(instance),
        "lo": lo,
        "hi": hi,
    })


def tmpl_share_range(instance: int | None, level: int, lo, hi) -> Template:
    """The share of slots at exactly ``level`` lies in [lo, hi] per exam."""
    lo_r = _bounded_rational(lo, "lo")
    hi_r = _bounded_rational(hi, "hi")
    if lo_r > hi_r:
        raise ModelError("share_range needs lo <= hi")
    return Template("share_range", {
        "instance": _instance_or_none(instance),
        "level": _positive_int(level, "level"),
        "lo": lo_r,
        "hi": hi_r,
    })


def tmpl_unique_per_exam() -> Template:
    """No exam asks the same question twice."""
    return Template("unique_per_exam", {})


def tmpl_pairwise_overlap(direction: str, bound) -> Template:
    """The shared-question count of every exam pair, as a fraction of exam
    length, is bounded from above (at_most) or below (at_least)."""
    if direction not in ("at_most", "at_least"):
        raise ModelError("overlap direction must be 'at_most' or 'at_least'")
    return Template("pairwise_overlap", {
        "direction": direction,
        "bound": _bounded_rational(bound, "bound"),
    })


# --- model and compilation --------------------------------------------------


@dataclass(frozen=True)
class ExamModel:
    """An exam task as authored: a bank, dimensions, templates, and optional
    raw expression requirements/constraints."""

    bank: QuestionBank
    k: int
    l: int
    templates: tuple[Template, ...] = ()
    requirements: tuple[Requirement, ...] = ()
    constraints: tuple[Constraint, ...] = ()


@dataclass(frozen=True)
class CompiledExam:
    """A compiled model: the solver-ready task, compile warnings, and the
    template provenance for every template-generated constraint id."""

    task: MultiConfigTask
    warnings: tuple[str, ...]
    provenance: Mapping[str, Template]

    def describe(self, cid: str) -> str:
        tpl = self.provenance.get(cid)
        if tpl is not None:
            return f"{cid}: {tpl.describe()}"
        expr_owner = {r.id: r for r in self.task.requirements}.get(cid)
        label = None
        if expr_owner is not None:
            label = expr_owner.label or "requirement expression"
            return f"{cid}: {label} [{expr_owner.owner}]"
        for con in self.task.constraints:
            if con.id == cid:
                return f"{cid}: {con.label or 'constraint expression'}"
        return cid


def _instance_scope(instance: int | None):
    """Concrete-instance scope, or the per-instance quantified form."""
    if instance is None:
        return None
    return Scope.of(instance)


def _expand(tpl: Template, bank: QuestionBank, k: int, l: int,
            warnings: list[str]) -> tuple:
    """Template -> (expr, label)."""
    p = tpl.params
    tag = tpl.tag
    if tag == "share_max":
        cats = p["categories"]
        bad = [c for c in cats if c > bank.q_bar]
        if bad:
            raise ModelError(f"share_max references categories {bad} above q_bar={bank.q_bar}")
        expr = Compare("<=", Share(Scope.of(p["instance"]),
                                   AttrIn("qtype", frozenset(cats))), Lit(p["bound"]))
        return expr, f"categories {_fmt(tuple(cats))} at most {_fmt(p['bound'])} of exam {p['instance']}"
    if tag == "exclude_type":
        if p["category"] > bank.q_bar:
            raise ModelError(f"exclude_type category {p['category']} above q_bar={bank.q_bar}")
        scope = _instance_scope(p["instance"]) or ALL_SLOTS
        where = f"exam {p['instance']}" if p["instance"] else "all exams"
        expr = Compare("==", Count(scope, AttrIn("qtype", frozenset({p["category"]}))), Lit(0))
        return expr, f"no type-{p['category']} question in {where}"
    if tag == "usage_cap":
        if p["question"] > bank.p:
            raise ModelError(f"usage_cap question {p['question']} not in bank 1..{bank.p}")
        expr = Compare("<=", Count(ALL_SLOTS, AttrIn("id", frozenset({p["question"]}))),
                       Lit(p["max_count"]))
        return expr, f"question {p['question']} used at most {p['max_count']} times"
    if tag == "require_one_of":
        ids = p["questions"]
        bad = [q for q in ids if q > bank.p]
        if bad:
            raise ModelError(f"require_one_of ids {bad} not in bank 1..{bank.p}")
        expr = ForAllInstances(
            Compare(">=", Count(Scope.of(CURRENT), AttrIn("id", frozenset(ids))), Lit(1)))
        return expr, f"each exam includes one of {_fmt(tuple(ids))}"
    if tag == "min_level":
        if p["min_level"] > bank.r:
            raise ModelError(f"min_level {p['min_level']} above r={bank.r}")
        expr = ForAllSlots(ALL_SLOTS, Compare(">=", AttrRef("level"), Lit(p["min_level"])))
        return expr, f"every question at level >= {p['min_level']}"
    if tag == "min_type_count":
        if p["category"] > bank.q_bar:
            raise ModelError(f"min_type_count category {p['category']} above q_bar={bank.q_bar}")
        if p["min_count"] > l:
            raise ModelError(
                f"min_type_count asks for {p['min_count']} questions but exams "
                f"have only {l} slots"
            )
        expr = ForAllInstances(
            Compare(">=", Count(Scope.of(CURRENT), AttrIn("qtype", frozenset({p["category"]}))),
                    Lit(p["min_count"])))
        return expr, f"each exam has >= {p['min_count']} type-{p['category']} questions"
    if tag == "duration":
        lo, hi, inst = p["lo"], p["hi"], p["instance"]
        scope = _instance_scope(inst)
        def body(s):
            if lo == hi:
                return Compare("==", Sum(s, "duration"), Lit(lo))
            return And((Compare(">=", Sum(s, "duration"), Lit(lo)),
                        Compare("<=", Sum(s, "duration"), Lit(hi))))
        expr = body(scope) if scope else ForAllInstances(body(Scope.of(CURRENT)))
        where = f"exam {inst}" if inst else "each exam"
        band = f"exactly {lo}" if lo == hi else f"in [{lo}, {hi}]"
        return expr, f"duration of {where} {band} minutes"
    if tag == "share_range":
        lo, hi, level, inst = p["lo"], p["hi"], p["level"], p["instance"]
        if level > bank.r:
            raise ModelError(f"share_range level {level} above r={bank.r}")
        clo, chi = share_count_band(lo, hi, l)
        if clo > chi:
            warnings.append(
                f"share_range [{_fmt(lo)}, {_fmt(hi)}] admits no integer count "
                f"for l={l} (needs {_fmt(Fraction(lo) * l)} <= count <= "
                f"{_fmt(Fraction(hi) * l)}): the constraint is unsatisfiable"
            )
        def body(s):
            pred = AttrIn("level", frozenset({level}))
            return And((Compare(">=", Share(s, pred), Lit(lo)),
                        Compare("<=", Share(s, pred), Lit(hi))))
        scope = _instance_scope(inst)
        expr = body(scope) if scope else ForAllInstances(body(Scope.of(CURRENT)))
        where = f"exam {inst}" if inst else "each exam"
        return expr, f"share of level-{level} questions in {where} within [{_fmt(lo)}, {_fmt(hi)}]"
    if tag == "unique_per_exam":
        if l > bank.p:
            raise ModelError(f"unique_per_exam impossible: l={l} exceeds bank size p={bank.p}")
        return ForAllInstances(AllDifferentSlots(CURRENT)), "no repeated question within an exam"
    if tag == "pairwise_overlap":
        op = "<=" if p["direction"] == "at_most" else ">="
        threshold = Fraction(p["bound"]) * l
        expr = PairwiseInstances(Compare(op, Overlap(PAIR_FIRST, PAIR_SECOND), Lit(threshold)))
        return expr, (f"overlap between each exam pair {p['direction'].replace('_', ' ')} "
                      f"{_fmt(p['bound'])} of exam length")
    raise ModelError(f"unknown template tag {tag!r}")


def compile_model(model: ExamModel) -> CompiledExam:
    """Expand templates, merge raw expressions, and build the task.

    Template entries with an owner become requirements (diagnosable by
    default); ownerless ones become model constraints.  An empty share band
    is a warning, not an error: the model is legitimately unsatisfiable and
    diagnosis should be able to explain it.
    """
    warnings: list[str] = []
    reqs = list(model.requirements)
    cons = list(model.constraints)
    taken = {r.id for r in reqs} | {c.id for c in cons}
    provenance: dict[str, Template] = {}

    auto = 0
    for tpl in model.templates:
        cid = tpl.id
        if cid is None:
            auto += 1
            cid = f"t{auto}"
            while cid in taken:
                auto += 1
                cid = f"t{auto}"
        if cid in taken:
            raise ModelError(f"duplicate constraint id {cid!r}")
        taken.add(cid)
        expr, label = _expand(tpl, model.bank, model.k, model.l, warnings)
        provenance[cid] = replace(tpl, id=cid)
        if tpl.owner is not None:
            reqs.append(Requirement(cid, tpl.owner, expr, label))
        else:
            cons.append(Constraint(cid, expr, label))

    task = build_task(model.bank, model.k, model.l, reqs, cons)
    return CompiledExam(task, tuple(warnings), provenance)


# --- bank files --------------------------------------------------------------

_BANK_COLUMNS = ("id", "type", "level", "duration")


def load_bank_with_remap(path) -> tuple[QuestionBank, dict[int, int]]:
    """Read a bank CSV (header id,type,level,duration; '#' lines ignored).

    Sparse input ids are renumbered densely to 1..p preserving file order,
    and the original->new table is returned (empty when ids were already
    dense).
    """
    path = Path(path)
    rows: list[tuple[int, dict[str, int]]] = []
    header: list[str] | None = None
    with path.open(encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(csv.reader(fh), start=1):
            if not raw or (raw[0].lstrip().startswith("#")):
                continue
            if all(not cell.strip() for cell in raw):
                continue
            cells = [c.strip() for c in raw]
            if header is None:
                header = cells
                if sorted(header) != sorted(_BANK_COLUMNS):
                    raise BankLoadError(
                        f"{path}:{lineno}: header must name exactly "
                        f"{', '.join(_BANK_COLUMNS)}; got {', '.join(header)}"
                    )
                continue
            if len(cells) != len(header):
                raise BankLoadError(f"{path}:{lineno}: expected {len(header)} fields, got {len(cells)}")
            record = {}
            for name, cell in zip(header, cells):
                if cell == "":
                    raise BankLoadError(f"{path}:{lineno}: missing {name}")
                try:
                    record[name] = int(cell)
                except ValueError:
                    raise BankLoadError(f"{path}:{lineno}: {name} must be an integer, got {cell!r}") from None
            rows.append((lineno, record))
    if header is None:
        raise BankLoadError(f"{path}: no header row found")
    if not rows:
        raise BankLoadError(f"{path}: bank has no questions")

    first_row: dict[int, int] = {}
    for lineno, rec in rows:
        qid = rec["id"]
        if qid in first_row:
            raise BankLoadError(
                f"{path}:{lineno}: duplicate id {qid} (first seen on row {first_row[qid]})"
            )
        first_row[qid] = lineno
        if qid < 1:
            raise BankLoadError(f"{path}:{lineno}: id must be >= 1")
        if rec["duration"] < 1:
            raise BankLoadError(f"{path}:{lineno}: duration must be positive")
        if rec["type"] < 1 or rec["level"] < 1:
            raise BankLoadError(f"{path}:{lineno}: type and level must be >= 1")

    ids = [rec["id"] for _, rec in rows]
    if sorted(ids) == list(range(1, len(ids) + 1)):
        remap: dict[int, int] = {}
        questions = [
            Question(rec["id"], rec["type"], rec["level"], rec["duration"])
            for _, rec in rows
        ]
    else:
        remap = {rec["id"]: new for new, (_, rec) in enumerate(rows, start=1)}
        questions = [
            Question(remap[rec["id"]], rec["type"], rec["level"], rec["duration"])
            for _, rec in rows
        ]
    return QuestionBank.from_questions(questions), remap


def load_bank(path) -> QuestionBank:
    """Validated bank from a CSV file; see load_bank_with_remap."""
    return load_bank_with_remap(path)[0]


# --- reports ------------------------------------------------------------------


@dataclass(frozen=True)
class SolutionStats:
    """Descriptive metrics of one solved exam set (k exams)."""

    durations: tuple[int, ...]
    type_hist: tuple[tuple[int, ...], ...]
    level_hist: tuple[tuple[int, ...], ...]
    overlap: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class ExamReport:
    """Metrics for a sequence of verified solutions.

    ``sets`` holds one SolutionStats per solution; ``usage`` counts, per
    bank question, the slots it fills across all exams of all solutions.
    """

    sets: tuple[SolutionStats, ...]
    usage: tuple[int, ...]


def report(solutions: Sequence[MultiConfiguration], model: ExamModel) -> ExamReport:
    """Compute the audit report; rejects any solution the task does not
    accept (reports are only for verified outputs)."""
    compiled = compile_model(model)
    task = compiled.task
    bank = model.bank
    usage = [0] * bank.p
    sets = []
    for n, conf in enumerate(solutions):
        bad = violated_ids(conf, task)
        if bad:
            raise ModelError(f"solution {n} violates constraint(s) {', '.join(bad)}")
        durations = []
        type_hist = []
        level_hist = []
        for i in range(1, conf.k + 1):
            row = conf.exams[i - 1]
            durations.append(sum(bank.question(q).duration for q in row))
            th = [0] * bank.q_bar
            lh = [0] * bank.r
            for q in row:
                question = bank.question(q)
                th[question.qtype - 1] += 1
                lh[question.level - 1] += 1
                usage[q - 1] += 1
            type_hist.append(tuple(th))
            level_hist.append(tuple(lh))
        overlap = []
        for a in range(1, conf.k + 1):
            line = []
            for b in range(1, conf.k + 1):
                if a == b:
                    line.append(conf.l)  # self-overlap reads as exam length
                else:
                    line.append(len(conf.instance_ids(a) & conf.instance_ids(b)))
            overlap.append(tuple(line))
        sets.append(SolutionStats(
            durations=tuple(durations),
            type_hist=tuple(type_hist),
            level_hist=tuple(level_hist),
            overlap=tuple(overlap),
        ))
    return ExamReport(tuple(sets), tuple(usage))
