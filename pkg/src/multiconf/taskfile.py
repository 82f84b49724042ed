"""Reading and writing model files and solution files.

A model file is a single JSON document: a ``bank`` (inline rows or a path
to a bank CSV), ``instances`` {k, l}, optional raw ``requirements`` and
``constraints`` carrying expression trees, and an optional ``templates``
list naming exam templates by tag.  Expressions serialize as nested tagged
objects, one ``node`` kind per expression type.  Rational thresholds are
written as "3/10"-style strings (or decimal strings, parsed exactly);
floats are rejected to keep share semantics exact.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

from .exam import (
    ExamModel,
    Template,
    load_bank_with_remap,
    tmpl_duration,
    tmpl_exclude_type,
    tmpl_min_level,
    tmpl_min_type_count,
    tmpl_pairwise_overlap,
    tmpl_require_one_of,
    tmpl_share_max,
    tmpl_share_range,
    tmpl_unique_per_exam,
    tmpl_usage_cap,
)
from .model import (
    AllDifferentSlots,
    And,
    AttrCmp,
    AttrIn,
    AttrRef,
    Compare,
    Constraint,
    Count,
    ForAllInstances,
    ForAllSlots,
    Lit,
    ModelError,
    MultiConfiguration,
    Not,
    Or,
    Overlap,
    Owner,
    PairwiseInstances,
    Question,
    QuestionBank,
    Requirement,
    Scope,
    Share,
    Sum,
    as_rational,
)


class TaskFileError(ModelError):
    """A malformed model/solution file; messages carry field locations."""


def _fail(ctx: str, message: str):
    raise TaskFileError(f"{ctx}: {message}")


def _expect(obj, types, ctx: str, what: str):
    if not isinstance(obj, types) or isinstance(obj, bool):
        _fail(ctx, f"expected {what}, got {type(obj).__name__}")
    return obj


def _int(obj, ctx: str) -> int:
    return _expect(obj, int, ctx, "an integer")


def rational_from_obj(obj, ctx: str):
    if isinstance(obj, bool) or isinstance(obj, float):
        _fail(ctx, "thresholds must be integers or exact ratio strings like \"3/10\"")
    if isinstance(obj, (int, str)):
        try:
            return as_rational(obj)
        except ModelError as exc:
            _fail(ctx, str(exc))
    _fail(ctx, f"expected a number, got {type(obj).__name__}")


def rational_to_obj(value):
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    return value


# --- owners -------------------------------------------------------------------


def owner_from_obj(obj, ctx: str) -> Owner:
    if obj == "instructor":
        return Owner.instructor()
    if isinstance(obj, Mapping) and set(obj) == {"examinee"}:
        return Owner.examinee(_int(obj["examinee"], ctx + ".examinee"))
    _fail(ctx, "owner must be \"instructor\" or {\"examinee\": i}")


def owner_to_obj(owner: Owner):
    if owner.kind == "instructor":
        return "instructor"
    return {"examinee": owner.index}


# --- expressions ----------------------------------------------------------------


def _scope_from_obj(obj, ctx: str) -> Scope:
    if not isinstance(obj, Mapping) or "instances" not in obj:
        _fail(ctx, "scope must be an object with an \"instances\" field")
    inst = obj["instances"]
    if inst == "all":
        return Scope(None)
    if isinstance(inst, list) and inst:
        refs = []
        for n, ref in enumerate(inst):
            if isinstance(ref, str) or (isinstance(ref, int) and not isinstance(ref, bool)):
                refs.append(ref)
            else:
                _fail(f"{ctx}.instances[{n}]", "must be an index or placeholder")
        try:
            return Scope(tuple(refs))
        except ModelError as exc:
            _fail(ctx, str(exc))
    _fail(ctx, "instances must be \"all\" or a non-empty list")


def _scope_to_obj(scope: Scope):
    if scope.instances is None:
        return {"instances": "all"}
    return {"instances": list(scope.instances)}


def _pred_from_obj(obj, ctx: str):
    if not isinstance(obj, Mapping) or "attr" not in obj:
        _fail(ctx, "predicate must be an object with an \"attr\" field")
    attr = obj["attr"]
    try:
        if "in" in obj:
            values = _expect(obj["in"], list, ctx + ".in", "a list of integers")
            return AttrIn(attr, frozenset(_int(v, ctx + ".in") for v in values))
        if "op" in obj and "value" in obj:
            return AttrCmp(attr, obj["op"], _int(obj["value"], ctx + ".value"))
    except ModelError as exc:
        _fail(ctx, str(exc))
    _fail(ctx, "predicate needs either \"in\" or \"op\"+\"value\"")


def _pred_to_obj(pred):
    if isinstance(pred, AttrIn):
        return {"attr": pred.attr, "in": sorted(pred.values)}
    return {"attr": pred.attr, "op": pred.op, "value": pred.value}


def expr_from_obj(obj, ctx: str = "expr"):
    if not isinstance(obj, Mapping) or "node" not in obj:
        _fail(ctx, "expression must be an object with a \"node\" field")
    node = obj["node"]
    try:
        if node == "lit":
            return Lit(rational_from_obj(obj["value"], ctx + ".value"))
        if node == "attr":
            return AttrRef(obj["attr"])
        if node == "count":
            return Count(_scope_from_obj(obj["scope"], ctx + ".scope"),
                         _pred_from_obj(obj["pred"], ctx + ".pred"))
        if node == "share":
            return Share(_scope_from_obj(obj["scope"], ctx + ".scope"),
                         _pred_from_obj(obj["pred"], ctx + ".pred"))
        if node == "sum":
            return Sum(_scope_from_obj(obj["scope"], ctx + ".scope"), obj["attr"])
        if node == "overlap":
            return Overlap(obj["first"], obj["second"])
        if node == "compare":
            return Compare(obj["op"],
                           expr_from_obj(obj["lhs"], ctx + ".lhs"),
                           expr_from_obj(obj["rhs"], ctx + ".rhs"))
        if node in ("and", "or"):
            args = _expect(obj["args"], list, ctx + ".args", "a list")
            parsed = tuple(
                expr_from_obj(a, f"{ctx}.args[{n}]") for n, a in enumerate(args)
            )
            return And(parsed) if node == "and" else Or(parsed)
        if node == "not":
            return Not(expr_from_obj(obj["arg"], ctx + ".arg"))
        if node == "forall_instances":
            return ForAllInstances(expr_from_obj(obj["body"], ctx + ".body"))
        if node == "forall_slots":
            return ForAllSlots(_scope_from_obj(obj["scope"], ctx + ".scope"),
                               expr_from_obj(obj["body"], ctx + ".body"))
        if node == "pairwise_instances":
            return PairwiseInstances(expr_from_obj(obj["body"], ctx + ".body"))
        if node == "alldifferent":
            return AllDifferentSlots(obj["instance"])
    except KeyError as exc:
        _fail(ctx, f"missing field {exc.args[0]!r} in {node!r} node")
    except ModelError as exc:
        if isinstance(exc, TaskFileError):
            raise
        _fail(ctx, str(exc))
    _fail(ctx, f"unknown expression node {node!r}")


def expr_to_obj(expr):
    if isinstance(expr, Lit):
        return {"node": "lit", "value": rational_to_obj(expr.value)}
    if isinstance(expr, AttrRef):
        return {"node": "attr", "attr": expr.attr}
    if isinstance(expr, Count):
        return {"node": "count", "scope": _scope_to_obj(expr.scope),
                "pred": _pred_to_obj(expr.pred)}
    if isinstance(expr, Share):
        return {"node": "share", "scope": _scope_to_obj(expr.scope),
                "pred": _pred_to_obj(expr.pred)}
    if isinstance(expr, Sum):
        return {"node": "sum", "scope": _scope_to_obj(expr.scope), "attr": expr.attr}
    if isinstance(expr, Overlap):
        return {"node": "overlap", "first": expr.first, "second": expr.second}
    if isinstance(expr, Compare):
        return {"node": "compare", "op": expr.op,
                "lhs": expr_to_obj(expr.lhs), "rhs": expr_to_obj(expr.rhs)}
    if isinstance(expr, And):
        return {"node": "and", "args": [expr_to_obj(a) for a in expr.args]}
    if isinstance(expr, Or):
        return {"node": "or", "args": [expr_to_obj(a) for a in expr.args]}
    if isinstance(expr, Not):
        return {"node": "not", "arg": expr_to_obj(expr.arg)}
    if isinstance(expr, ForAllInstances):
        return {"node": "forall_instances", "body": expr_to_obj(expr.body)}
    if isinstance(expr, ForAllSlots):
        return {"node": "forall_slots", "scope": _scope_to_obj(expr.scope),
                "body": expr_to_obj(expr.body)}
    if isinstance(expr, PairwiseInstances):
        return {"node": "pairwise_instances", "body": expr_to_obj(expr.body)}
    if isinstance(expr, AllDifferentSlots):
        return {"node": "alldifferent", "instance": expr.instance}
    raise ModelError(f"cannot serialize {type(expr).__name__}")


# --- templates ------------------------------------------------------------------

_TEMPLATE_FIELDS = {
    "share_max": ({"instance", "categories", "bound"}, set()),
    "exclude_type": ({"category"}, {"instance"}),
    "usage_cap": ({"question", "max_count"}, set()),
    "require_one_of": ({"questions"}, set()),
    "min_level": ({"min_level"}, set()),
    "min_type_count": ({"category", "min_count"}, set()),
    "duration": ({"lo", "hi"}, {"instance"}),
    "share_range": ({"level", "lo", "hi"}, {"instance"}),
    "unique_per_exam": (set(), set()),
    "pairwise_overlap": ({"direction", "bound"}, set()),
}


def template_from_obj(obj, ctx: str) -> Template:
    if not isinstance(obj, Mapping) or "tag" not in obj:
        _fail(ctx, "template must be an object with a \"tag\" field")
    tag = obj["tag"]
    if tag not in _TEMPLATE_FIELDS:
        _fail(ctx + ".tag", f"unknown template tag {tag!r}")
    required, optional = _TEMPLATE_FIELDS[tag]
    fields = set(obj) - {"tag", "id", "owner"}
    missing = required - fields
    extra = fields - required - optional
    if missing:
        _fail(ctx, f"{tag} template missing field(s) {sorted(missing)}")
    if extra:
        _fail(ctx, f"{tag} template has unknown field(s) {sorted(extra)}")

    owner = None
    if "owner" in obj:
        owner = owner_from_obj(obj["owner"], ctx + ".owner")
    tid = obj.get("id")
    if tid is not None and not isinstance(tid, str):
        _fail(ctx + ".id", "id must be a string")

    def ints(key):
        values = _expect(obj[key], list, f"{ctx}.{key}", "a list of integers")
        return [_int(v, f"{ctx}.{key}") for v in values]

    try:
        if tag == "share_max":
            tpl = tmpl_share_max(owner, _int(obj["instance"], ctx + ".instance"),
                                 ints("categories"),
                                 rational_from_obj(obj["bound"], ctx + ".bound"))
        elif tag == "exclude_type":
            inst = obj.get("instance")
            tpl = tmpl_exclude_type(owner,
                                    None if inst is None else _int(inst, ctx + ".instance"),
                                    _int(obj["category"], ctx + ".category"))
        elif tag == "usage_cap":
            tpl = tmpl_usage_cap(_int(obj["question"], ctx + ".question"),
                                 _int(obj["max_count"], ctx + ".max_count"))
        elif tag == "require_one_of":
            tpl = tmpl_require_one_of(ints("questions"))
        elif tag == "min_level":
            tpl = tmpl_min_level(_int(obj["min_level"], ctx + ".min_level"))
        elif tag == "min_type_count":
            tpl = tmpl_min_type_count(_int(obj["category"], ctx + ".category"),
                                      _int(obj["min_count"], ctx + ".min_count"))
        elif tag == "duration":
            inst = obj.get("instance")
            tpl = tmpl_duration(None if inst is None else _int(inst, ctx + ".instance"),
                                _int(obj["lo"], ctx + ".lo"),
                                _int(obj["hi"], ctx + ".hi"))
        elif tag == "share_range":
            inst = obj.get("instance")
            tpl = tmpl_share_range(None if inst is None else _int(inst, ctx + ".instance"),
                                   _int(obj["level"], ctx + ".level"),
                                   rational_from_obj(obj["lo"], ctx + ".lo"),
                                   rational_from_obj(obj["hi"], ctx + ".hi"))
        elif tag == "unique_per_exam":
            tpl = tmpl_unique_per_exam()
        else:
            tpl = tmpl_pairwise_overlap(obj["direction"],
                                        rational_from_obj(obj["bound"], ctx + ".bound"))
    except ModelError as exc:
        if isinstance(exc, TaskFileError):
            raise
        _fail(ctx, str(exc))
    if owner is not None and tpl.owner is None:
        tpl = Template(tpl.tag, tpl.params, owner=owner, id=tpl.id)
    if tid is not None:
        tpl = Template(tpl.tag, tpl.params, owner=tpl.owner, id=tid)
    return tpl


# --- model files -----------------------------------------------------------------


def _bank_from_obj(obj, ctx: str, base_dir: Path) -> QuestionBank:
    if isinstance(obj, str):
        bank, _remap = load_bank_with_remap(base_dir / obj)
        return bank
    rows = _expect(obj, list, ctx, "a list of question rows or a CSV path")
    questions = []
    for n, row in enumerate(rows):
        rctx = f"{ctx}[{n}]"
        if not isinstance(row, Mapping):
            _fail(rctx, "question row must be an object")
        extra = set(row) - {"id", "type", "level", "duration"}
        if extra:
            _fail(rctx, f"unknown field(s) {sorted(extra)}")
        try:
            questions.append(Question(
                _int(row["id"], rctx + ".id"),
                _int(row["type"], rctx + ".type"),
                _int(row["level"], rctx + ".level"),
                _int(row["duration"], rctx + ".duration"),
            ))
        except KeyError as exc:
            _fail(rctx, f"missing field {exc.args[0]!r}")
        except ModelError as exc:
            if isinstance(exc, TaskFileError):
                raise
            _fail(rctx, str(exc))
    try:
        return QuestionBank.from_questions(questions)
    except ModelError as exc:
        _fail(ctx, str(exc))


_TOP_FIELDS = {"bank", "instances", "requirements", "constraints", "templates"}


def load_exam_model(path) -> ExamModel:
    """Parse a model file into an ExamModel (not yet compiled)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise TaskFileError(f"{path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TaskFileError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise TaskFileError(f"{path}: top level must be a JSON object")
    unknown = [key for key in doc if key not in _TOP_FIELDS and not key.startswith("$")]
    if unknown:
        raise TaskFileError(f"{path}: unknown top-level field(s) {sorted(unknown)}")
    for field in ("bank", "instances"):
        if field not in doc:
            raise TaskFileError(f"{path}: missing required field {field!r}")

    bank = _bank_from_obj(doc["bank"], "bank", path.parent)
    inst = doc["instances"]
    if not isinstance(inst, Mapping) or set(inst) != {"k", "l"}:
        raise TaskFileError(f"{path}: instances must be an object with fields k and l")
    k = _int(inst["k"], "instances.k")
    l = _int(inst["l"], "instances.l")

    requirements = []
    for n, obj in enumerate(doc.get("requirements", [])):
        ctx = f"requirements[{n}]"
        if not isinstance(obj, Mapping):
            _fail(ctx, "must be an object")
        for field in ("id", "owner", "expr"):
            if field not in obj:
                _fail(ctx, f"missing field {field!r}")
        requirements.append(Requirement(
            str(obj["id"]),
            owner_from_obj(obj["owner"], ctx + ".owner"),
            expr_from_obj(obj["expr"], ctx + ".expr"),
            str(obj.get("label", "")),
        ))
    constraints = []
    for n, obj in enumerate(doc.get("constraints", [])):
        ctx = f"constraints[{n}]"
        if not isinstance(obj, Mapping):
            _fail(ctx, "must be an object")
        for field in ("id", "expr"):
            if field not in obj:
                _fail(ctx, f"missing field {field!r}")
        constraints.append(Constraint(
            str(obj["id"]),
            expr_from_obj(obj["expr"], ctx + ".expr"),
            str(obj.get("label", "")),
        ))
    templates = [
        template_from_obj(obj, f"templates[{n}]")
        for n, obj in enumerate(doc.get("templates", []))
    ]
    return ExamModel(bank, k, l, tuple(templates), tuple(requirements), tuple(constraints))


# --- solution files ---------------------------------------------------------------


def solutions_to_obj(solutions: Sequence[MultiConfiguration]) -> list:
    return [
        {"exams": [
            {"examinee": i, "questions": list(conf.exams[i - 1])}
            for i in range(1, conf.k + 1)
        ]}
        for conf in solutions
    ]


def write_solutions_json(path, solutions: Sequence[MultiConfiguration]) -> None:
    payload = json.dumps(solutions_to_obj(solutions), indent=2) + "\n"
    Path(path).write_text(payload, encoding="utf-8")


def write_solutions_csv(path, solutions: Sequence[MultiConfiguration]) -> None:
    lines = ["solution,examinee,slot,question"]
    for n, conf in enumerate(solutions):
        for i in range(1, conf.k + 1):
            for j in range(1, conf.l + 1):
                lines.append(f"{n},{i},{j},{conf.value(i, j)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_solutions(path) -> list[MultiConfiguration]:
    """Read a solutions file written by write_solutions_json/csv."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_solutions_csv(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TaskFileError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(doc, list):
        raise TaskFileError(f"{path}: expected a JSON array of solutions")
    out = []
    for n, sol in enumerate(doc):
        ctx = f"{path}[{n}]"
        if not isinstance(sol, Mapping) or "exams" not in sol:
            raise TaskFileError(f"{ctx}: solution must be an object with \"exams\"")
        rows: dict[int, list[int]] = {}
        for exam in sol["exams"]:
            if not isinstance(exam, Mapping) or "examinee" not in exam or "questions" not in exam:
                raise TaskFileError(f"{ctx}: exam entries need examinee and questions")
            rows[_int(exam["examinee"], ctx)] = [
                _int(q, ctx) for q in exam["questions"]
            ]
        if sorted(rows) != list(range(1, len(rows) + 1)):
            raise TaskFileError(f"{ctx}: examinee indices must be 1..k")
        try:
            out.append(MultiConfiguration(tuple(tuple(rows[i]) for i in sorted(rows))))
        except ModelError as exc:
            raise TaskFileError(f"{ctx}: {exc}") from None
    return out


def _read_solutions_csv(path: Path) -> list[MultiConfiguration]:
    import csv as _csv

    with path.open(encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames != ["solution", "examinee", "slot", "question"]:
            raise TaskFileError(f"{path}: expected header solution,examinee,slot,question")
        cells: dict[int, dict[tuple[int, int], int]] = {}
        for lineno, row in enumerate(reader, start=2):
            try:
                n = int(row["solution"])
                i = int(row["examinee"])
                j = int(row["slot"])
                q = int(row["question"])
            except (TypeError, ValueError):
                raise TaskFileError(f"{path}:{lineno}: non-integer cell") from None
            cells.setdefault(n, {})[(i, j)] = q
    if sorted(cells) != list(range(len(cells))):
        raise TaskFileError(f"{path}: solution indices must be 0..n-1")
    out = []
    for n in sorted(cells):
        try:
            out.append(MultiConfiguration.from_assignment(cells[n]))
        except ModelError as exc:
            raise TaskFileError(f"{path}: solution {n}: {exc}") from None
    return out
