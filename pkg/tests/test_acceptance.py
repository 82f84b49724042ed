"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete.
"""

import json
import math
import random
import time
from fractions import Fraction
from pathlib import Path

import pytest

from multiconf.cli import EXIT_OK, main
from multiconf.diagnose import diagnose_report
from multiconf.exam import (
    ExamModel,
    compile_model,
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
from multiconf.model import (
    MultiConfiguration,
    Owner,
    Question,
    QuestionBank,
    evaluate,
    is_consistent,
)
from multiconf.propagate import (
    FixpointResult,
    compile_propagators,
    fixpoint,
    init_store,
    share_count_band,
)
from multiconf.search import SearchConfig, enumerate_solutions

from gen import (
    brute_min_diagnoses,
    brute_satisfiable,
    brute_solutions,
    random_exam_model,
)


def report_line(number: int, name: str):
    """Print the criterion verdict even when the assertions inside fail."""

    class _Reporter:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            verdict = "PASS" if exc_type is None else "FAIL"
            print(f"[acceptance] criterion {number} ({name}): {verdict}")
            return False

    return _Reporter()


# --- shared randomized small-task suite (criteria 1 and 4) ---------------------


@pytest.fixture(scope="module")
def small_task_suite():
    rng = random.Random(2026)
    suite = []
    for _ in range(200):
        task = compile_model(random_exam_model(rng)).task
        suite.append((task, set(brute_solutions(task))))
    return suite


def test_criterion_1_oracle_equivalence(small_task_suite):
    with report_line(1, "oracle equivalence on 200 random tasks"):
        start = time.monotonic()
        for n, (task, brute) in enumerate(small_task_suite):
            res = enumerate_solutions(task, SearchConfig(
                max_solutions=None, symmetry_breaking=False,
                seed=n, value_order="lexicographic"))
            assert res.exhausted and not res.limit_hit, f"task {n} interrupted"
            assert set(res.solutions) == brute, f"task {n}: solution sets differ"
            assert len(res.solutions) == len(set(res.solutions))
        elapsed = time.monotonic() - start
        assert elapsed < 60.0, f"suite took {elapsed:.1f}s (budget 60s)"


def test_criterion_4_propagation_soundness(small_task_suite):
    with report_line(4, "propagation sound on the random suite"):
        failed_seen = 0
        for n, (task, brute) in enumerate(small_task_suite):
            store = init_store(task)
            outcome = fixpoint(store, compile_propagators(task))
            if outcome is FixpointResult.FAILED:
                assert brute == set(), f"task {n}: failed fixpoint but solutions exist"
                failed_seen += 1
                continue
            for conf in brute:
                for i in range(1, task.k + 1):
                    for j in range(1, task.l + 1):
                        assert conf.value(i, j) in store.domain(i, j), (
                            f"task {n}: pruned a value used by a solution")
        assert failed_seen > 0, "suite never exercised the failure verdict"


# --- criterion 2: one satisfying and one violating witness per constraint --------


def witness_bank():
    # 8 questions: types 1(alpha) 2(beta) 3(gamma) 4(delta), levels 1..3
    rows = [
        (1, 1, 2, 10), (2, 2, 2, 20), (3, 3, 2, 10), (4, 3, 3, 20),
        (5, 3, 2, 30), (6, 4, 2, 10), (7, 1, 3, 20), (8, 2, 1, 10),
    ]
    return QuestionBank.from_questions([Question(*r) for r in rows])


def expand(tpl, k, l, bank=None):
    compiled = compile_model(ExamModel(bank or witness_bank(), k, l, (tpl,)))
    (cid,) = compiled.provenance
    return compiled.task.expr_of(cid)


def test_criterion_2_paper_constraint_witnesses():
    with report_line(2, "witness pairs for all 11 catalog constraints"):
        bank = witness_bank()
        cases = []

        # share of categories {1, 2} at most 30% of a 10-slot exam
        r1 = expand(tmpl_share_max(Owner.examinee(1), 1, {1, 2}, "3/10"), 1, 10)
        cases.append(("r1", r1,
                      MultiConfiguration(((1, 2, 7, 3, 3, 3, 3, 3, 3, 3),)),
                      MultiConfiguration(((1, 2, 7, 8, 3, 3, 3, 3, 3, 3),))))

        # examinee 1 wants no gamma (type 3) questions
        r2 = expand(tmpl_exclude_type(Owner.examinee(1), 1, 3), 2, 2)
        cases.append(("r2", r2,
                      MultiConfiguration(((1, 2), (3, 4))),
                      MultiConfiguration(((1, 3), (3, 4)))))

        # question 5 in at most 1 slot overall
        c1 = expand(tmpl_usage_cap(5, 1), 2, 2)
        cases.append(("c1", c1,
                      MultiConfiguration(((5, 1), (2, 3))),
                      MultiConfiguration(((5, 1), (5, 3)))))

        # every exam includes question 1 or question 2
        c2 = expand(tmpl_require_one_of({1, 2}), 2, 2)
        cases.append(("c2", c2,
                      MultiConfiguration(((1, 3), (2, 4))),
                      MultiConfiguration(((1, 3), (4, 5)))))

        # minimum complexity level 2 everywhere
        c3 = expand(tmpl_min_level(2), 2, 2)
        cases.append(("c3", c3,
                      MultiConfiguration(((1, 3), (4, 5))),
                      MultiConfiguration(((1, 8), (4, 5)))))

        # no delta (type 4) questions anywhere
        c4 = expand(tmpl_exclude_type(None, None, 4), 2, 2)
        cases.append(("c4", c4,
                      MultiConfiguration(((1, 3), (4, 5))),
                      MultiConfiguration(((1, 3), (6, 5)))))

        # at least three gamma questions in each exam
        c5 = expand(tmpl_min_type_count(3, 3), 2, 4)
        cases.append(("c5", c5,
                      MultiConfiguration(((3, 4, 5, 1), (3, 4, 5, 2))),
                      MultiConfiguration(((3, 4, 5, 1), (3, 4, 1, 2)))))

        # exact 40-minute exams (interval with lo == hi)
        c6 = expand(tmpl_duration(None, 40, 40), 1, 3)
        cases.append(("c6", c6,
                      MultiConfiguration(((1, 3, 2),)),     # 10+10+20
                      MultiConfiguration(((1, 3, 5),))))    # 10+10+30 = 50

        # share of level-3 questions within [16%, 18%] of 50 slots
        fifty = QuestionBank.from_questions(
            [Question(i, 1, 3 if i <= 25 else 1, 5) for i in range(1, 51)])
        c7 = expand(tmpl_share_range(None, 3, "16/100", "18/100"), 1, 50, bank=fifty)
        cases.append(("c7", c7,
                      MultiConfiguration((tuple([1] * 8 + [26] * 42),)),
                      MultiConfiguration((tuple([1] * 7 + [26] * 43),))))

        # each examinee asked a specific question only once
        uniq = expand(tmpl_unique_per_exam(), 2, 3)
        cases.append(("unique", uniq,
                      MultiConfiguration(((1, 2, 3), (4, 5, 6))),
                      MultiConfiguration(((1, 2, 1), (4, 5, 6)))))

        # question overlap between each exam pair at most half the exam
        over = expand(tmpl_pairwise_overlap("at_most", "1/2"), 2, 4)
        cases.append(("overlap", over,
                      MultiConfiguration(((1, 2, 3, 4), (3, 4, 5, 6))),
                      MultiConfiguration(((1, 2, 3, 4), (2, 3, 4, 6)))))

        assert len(cases) == 11
        for name, expr, good, bad in cases:
            use_bank = fifty if name == "c7" else bank
            assert evaluate(expr, good, use_bank) is True, f"{name}: satisfying witness rejected"
            assert evaluate(expr, bad, use_bank) is False, f"{name}: violating witness accepted"


# --- criterion 3: exact rational share boundaries ---------------------------------


def test_criterion_3_boundary_rationals():
    with report_line(3, "share compilation hits exact integer bands"):
        lo, hi = share_count_band(None, Fraction(3, 10), 10)
        assert (lo, hi) == (0, 3)
        for count in range(0, 11):
            assert (lo <= count <= hi) == (count <= 3)

        lo, hi = share_count_band(Fraction(16, 100), Fraction(18, 100), 50)
        assert (lo, hi) == (8, 9)
        for count in range(0, 51):
            assert (lo <= count <= hi) == (count in (8, 9))

        # the evaluator agrees with the compiled band on every count
        fifty = QuestionBank.from_questions(
            [Question(i, 1, 3 if i <= 50 else 1, 5) for i in range(1, 101)])
        tpl = tmpl_share_range(None, 3, "16/100", "18/100")
        expr = expand(tpl, 1, 50, bank=fifty)
        for count in range(0, 51):
            row = [1 + i for i in range(count)] + [51 + i for i in range(50 - count)]
            conf = MultiConfiguration((tuple(row),))
            assert evaluate(expr, conf, fifty) == (count in (8, 9)), count


# --- criterion 5: diagnosis minimality and completeness ----------------------------


def test_criterion_5_diagnosis_minimality():
    with report_line(5, "diagnoses minimal and complete on 100 infeasible tasks"):
        rng = random.Random(515)
        found = 0
        attempts = 0
        while found < 100:
            attempts += 1
            assert attempts < 5000, "generator failed to produce enough infeasible tasks"
            task = compile_model(
                random_exam_model(rng, max_kl=4, force_requirements=True)).task
            req = [r.id for r in task.requirements]
            base = [c.id for c in task.constraints]
            if not brute_satisfiable(task, base):
                continue
            if brute_satisfiable(task, req + base):
                continue
            found += 1
            rep = diagnose_report(req, base, task)

            for conflict in rep.conflicts:
                ids = set(conflict.ids)
                assert not brute_satisfiable(task, set(base) | ids), (
                    f"task {found}: conflict {sorted(ids)} is not inconsistent")
                for cid in ids:
                    assert brute_satisfiable(task, set(base) | (ids - {cid})), (
                        f"task {found}: conflict {sorted(ids)} not minimal at {cid}")

            for diag in rep.diagnoses:
                keep = set(base) | {r for r in req if r not in diag.ids}
                assert brute_satisfiable(task, keep), (
                    f"task {found}: diagnosis {sorted(diag.ids)} does not restore")
                for cid in diag.ids:
                    partial = set(base) | {r for r in req if r not in (diag.ids - {cid})}
                    assert not brute_satisfiable(task, partial), (
                        f"task {found}: diagnosis {sorted(diag.ids)} not minimal at {cid}")

            got = {d.ids for d in rep.diagnoses}
            want = brute_min_diagnoses(task, req, base)
            assert got == want, (
                f"task {found}: diagnoses {sorted(map(sorted, got))} != "
                f"brute force {sorted(map(sorted, want))}")


# --- criterion 6: symmetry-breaking count law ---------------------------------------


def test_criterion_6_symmetry_count_law():
    with report_line(6, "canonical count times (l!)^k equals full count"):
        fixtures = []
        bank_a = QuestionBank.from_questions(
            [Question(i, 1 + (i - 1) % 2, 1, 5) for i in range(1, 6)])
        fixtures.append(ExamModel(bank_a, 1, 3, (tmpl_unique_per_exam(),)))
        fixtures.append(ExamModel(bank_a, 2, 2, (tmpl_unique_per_exam(),)))
        fixtures.append(ExamModel(bank_a, 2, 2, (
            tmpl_unique_per_exam(),
            tmpl_min_type_count(2, 1),
            tmpl_pairwise_overlap("at_most", "1/2"),
        )))
        bank_b = QuestionBank.from_questions(
            [Question(i, 1, 1 + (i - 1) % 3, i) for i in range(1, 5)])
        fixtures.append(ExamModel(bank_b, 1, 3, (
            tmpl_unique_per_exam(), tmpl_duration(None, 5, 9))))

        for n, model in enumerate(fixtures):
            task = compile_model(model).task
            canon = enumerate_solutions(task, SearchConfig(
                max_solutions=None, value_order="lexicographic"))
            full = enumerate_solutions(task, SearchConfig(
                max_solutions=None, symmetry_breaking=False, value_order="lexicographic"))
            assert canon.exhausted and full.exhausted
            factor = math.factorial(task.l) ** task.k
            assert len(canon.solutions) * factor == len(full.solutions), (
                f"fixture {n}: {len(canon.solutions)} x {factor} != {len(full.solutions)}")
            assert len(full.solutions) > 0, f"fixture {n} is vacuous"


# --- criterion 7: bit-identical reruns ------------------------------------------------


def test_criterion_7_cmd_solve_determinism(tmp_path, demo_model_path):
    with report_line(7, "cmd_solve reruns byte-identical (modulo timing)"):
        outs = []
        for run_dir in ("one", "two"):
            d = tmp_path / run_dir
            d.mkdir()
            out = d / "solutions.json"
            code = main(["solve", str(demo_model_path), "--seed", "11",
                         "--max-solutions", "4", "--out", str(out)])
            assert code == EXIT_OK
            outs.append(d)
        a, b = outs
        assert (a / "solutions.json").read_bytes() == (b / "solutions.json").read_bytes()
        man_a = json.loads((a / "solutions.manifest.json").read_text())
        man_b = json.loads((b / "solutions.manifest.json").read_text())
        for man in (man_a, man_b):
            man.pop("timing")
            man["output"].pop("path")
        assert man_a == man_b


# --- criterion 8: desk-scale performance ----------------------------------------------


def desk_scale_model() -> dict:
    rng = random.Random(2601)
    bank = [{"id": i, "type": rng.randint(1, 6), "level": rng.randint(1, 3),
             "duration": rng.randint(2, 15)} for i in range(1, 201)]
    caps = [{"tag": "usage_cap", "id": f"cap{q}", "question": q, "max_count": 3}
            for q in (5, 17, 42, 99, 150)]
    return {
        "bank": bank,
        "instances": {"k": 30, "l": 10},
        "templates": [
            {"tag": "min_level", "id": "c3", "min_level": 2},
            {"tag": "exclude_type", "id": "c4", "category": 6},
            {"tag": "min_type_count", "id": "c5", "category": 3, "min_count": 3},
            {"tag": "duration", "id": "c6", "lo": 60, "hi": 130},
            {"tag": "share_range", "id": "c7", "level": 3, "lo": "1/10", "hi": "2/5"},
            {"tag": "unique_per_exam", "id": "u1"},
            {"tag": "pairwise_overlap", "id": "o1", "direction": "at_most", "bound": "1/2"},
            *caps,
        ],
    }


def test_criterion_8_desk_scale_performance(tmp_path):
    with report_line(8, "30 exams over a 200-question bank in under 5s"):
        model_path = tmp_path / "desk.json"
        model_path.write_text(json.dumps(desk_scale_model()))
        out = tmp_path / "exams.json"

        start = time.monotonic()
        code = main(["solve", str(model_path), "--seed", "0", "--out", str(out)])
        elapsed = time.monotonic() - start

        assert code == EXIT_OK
        assert elapsed < 5.0, f"cmd_solve took {elapsed:.2f}s (budget 5s)"

        from multiconf.taskfile import load_exam_model, read_solutions

        solutions = read_solutions(out)
        assert len(solutions) == 1 and solutions[0].k == 30 and solutions[0].l == 10
        task = compile_model(load_exam_model(model_path)).task
        assert is_consistent(solutions[0], task)

        manifest = json.loads((tmp_path / "exams.manifest.json").read_text())
        assert manifest["outcome"]["nodes"] > 0
        assert manifest["outcome"]["status"] == "sat"
