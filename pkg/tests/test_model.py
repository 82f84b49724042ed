"""Expression semantics, task validation, and evaluator properties."""

import random
from fractions import Fraction
from itertools import combinations, product

import pytest

from multiconf.model import (
    ALL_SLOTS,
    AllDifferentSlots,
    And,
    AttrCmp,
    AttrIn,
    AttrRef,
    Compare,
    Count,
    CURRENT,
    ForAllInstances,
    ForAllSlots,
    Lit,
    ModelError,
    MultiConfiguration,
    Not,
    Or,
    Overlap,
    Owner,
    PAIR_FIRST,
    PAIR_SECOND,
    PairwiseInstances,
    Question,
    QuestionBank,
    Requirement,
    Scope,
    Share,
    Sum,
    build_task,
    evaluate,
    is_consistent,
    violated_ids,
)

from gen import brute_solutions


def bank5():
    # ids 1..5; qtype cycles 1,2,3; level alternates 1,2; durations vary
    qs = [Question(i, 1 + (i - 1) % 3, 1 + (i - 1) % 2, 5 + i) for i in range(1, 6)]
    return QuestionBank.from_questions(qs)


def test_bank_rejects_duplicate_and_sparse_ids():
    q = Question(1, 1, 1, 5)
    with pytest.raises(ModelError, match="duplicate"):
        QuestionBank.from_questions([q, Question(1, 2, 1, 5)])
    with pytest.raises(ModelError, match="exactly 1..2"):
        QuestionBank.from_questions([q, Question(3, 2, 1, 5)])


def test_bank_declared_ranges_cover_observed():
    qs = [Question(1, 3, 2, 5)]
    with pytest.raises(ModelError, match="q_bar"):
        QuestionBank(tuple(qs), q_bar=2, r=2)
    with pytest.raises(ModelError, match="r is below"):
        QuestionBank(tuple(qs), q_bar=3, r=1)


def test_question_field_validation():
    with pytest.raises(ModelError):
        Question(0, 1, 1, 5)
    with pytest.raises(ModelError):
        Question(1, 1, 1, 0)


def test_build_task_shapes_and_domains():
    bank = bank5()
    task = build_task(bank, 2, 3, [], [])
    assert task.num_slots == 6
    assert len(task.slot_vars()) == 6
    assert task.bank.p == 5


def test_build_task_rejects_empty_bank():
    empty = QuestionBank((), 0, 0)
    with pytest.raises(ModelError, match="empty bank"):
        build_task(empty, 1, 1, [], [])


def test_build_task_rejects_duplicate_ids():
    bank = bank5()
    c = Compare("==", Count(ALL_SLOTS, AttrIn("qtype", frozenset({1}))), Lit(0))
    with pytest.raises(ModelError, match="duplicate constraint id"):
        build_task(bank, 1, 1, [], [("x", c), ("x", c)])


def test_build_task_rejects_out_of_range_category():
    bank = bank5()  # q_bar = 3
    c = Compare("==", Count(ALL_SLOTS, AttrIn("qtype", frozenset({7}))), Lit(0))
    with pytest.raises(ModelError, match="qtype=7"):
        build_task(bank, 1, 2, [], [("c", c)])


def test_build_task_rejects_uniqueness_pigeonhole():
    bank = QuestionBank.from_questions([Question(i, 1, 1, 5) for i in range(1, 4)])
    with pytest.raises(ModelError, match="l exceeds p under uniqueness"):
        build_task(bank, 1, 4, [], [("u", AllDifferentSlots(1))])


def test_placeholder_outside_quantifier_rejected():
    bank = bank5()
    loose = Compare(">=", Count(Scope.of(CURRENT), AttrIn("qtype", frozenset({1}))), Lit(1))
    with pytest.raises(ModelError, match="outside its quantifier"):
        build_task(bank, 1, 2, [], [("c", loose)])


def test_usage_cap_zero_excludes_value():
    # a zero cap on question v makes any configuration containing v false
    bank = bank5()
    c1 = Compare("<=", Count(ALL_SLOTS, AttrIn("id", frozenset({2}))), Lit(0))
    assert evaluate(c1, MultiConfiguration(((1, 3), (4, 5))), bank)
    assert not evaluate(c1, MultiConfiguration(((1, 2), (4, 5))), bank)


def test_share_boundary_three_of_ten():
    # 3 of 10 matching slots meets a 3/10 cap exactly; 4 does not
    bank = bank5()
    r1 = Compare("<=", Share(Scope.of(1), AttrIn("qtype", frozenset({1, 2}))), Lit("3/10"))
    # qtype in {1,2}: ids 1,2,4,5 match; id 3 is qtype 3
    three = MultiConfiguration(((1, 2, 4, 3, 3, 3, 3, 3, 3, 3),))
    four = MultiConfiguration(((1, 2, 4, 5, 3, 3, 3, 3, 3, 3),))
    assert evaluate(r1, three, bank)
    assert not evaluate(r1, four, bank)


def test_share_band_sixteen_to_eighteen_of_fifty():
    bank = QuestionBank.from_questions(
        [Question(i, 1, 2 if i <= 25 else 1, 5) for i in range(1, 51)])
    pred = AttrIn("level", frozenset({2}))
    band = And((
        Compare(">=", Share(Scope.of(1), pred), Lit("16/100")),
        Compare("<=", Share(Scope.of(1), pred), Lit("18/100")),
    ))

    def conf_with(n_level2: int) -> MultiConfiguration:
        row = [1] * n_level2 + [26] * (50 - n_level2)  # id<=25 are level 2
        return MultiConfiguration((tuple(row),))

    assert evaluate(band, conf_with(8), bank)
    assert evaluate(band, conf_with(9), bank)
    assert not evaluate(band, conf_with(7), bank)
    assert not evaluate(band, conf_with(10), bank)


def test_count_constraint_agrees_with_direct_count():
    # enumerate a tiny task and compare the evaluator against a literal count
    bank = QuestionBank.from_questions(
        [Question(1, 3, 1, 5), Question(2, 3, 1, 5), Question(3, 1, 1, 5), Question(4, 3, 2, 5)])
    c5 = Compare(">=", Count(Scope.of(1), AttrIn("qtype", frozenset({3}))), Lit(3))
    gamma_ids = {1, 2, 4}
    for vals in product(range(1, 5), repeat=3):
        conf = MultiConfiguration((vals,))
        expected = sum(1 for v in vals if v in gamma_ids) >= 3
        assert evaluate(c5, conf, bank) == expected
    for vals in combinations(range(1, 5), 3):
        conf = MultiConfiguration((tuple(vals),))
        expected = sum(1 for v in vals if v in gamma_ids) >= 3
        assert evaluate(c5, conf, bank) == expected


def test_is_consistent_empty_sets_vacuous():
    task = build_task(bank5(), 2, 2, [], [])
    assert is_consistent(MultiConfiguration(((1, 1), (2, 2))), task)


def test_is_consistent_equals_conjunction_of_evaluates():
    rng = random.Random(7)
    bank = bank5()
    exprs = [
        ("a", Compare("==", Count(ALL_SLOTS, AttrIn("qtype", frozenset({2}))), Lit(0))),
        ("b", ForAllInstances(Compare(">=", Count(Scope.of(CURRENT), AttrIn("level", frozenset({2}))), Lit(1)))),
        ("c", Compare("<=", Sum(Scope.of(1), "duration"), Lit(18))),
    ]
    task = build_task(bank, 2, 2, [], exprs)
    for _ in range(50):
        conf = MultiConfiguration(tuple(
            tuple(rng.randint(1, 5) for _ in range(2)) for _ in range(2)))
        direct = all(evaluate(e, conf, bank) for _, e in exprs)
        assert is_consistent(conf, task) == direct
        assert (violated_ids(conf, task) == []) == direct


def test_boolean_connectives_compose():
    rng = random.Random(13)
    bank = bank5()
    leaves = [
        Compare(">=", Count(Scope.of(1), AttrIn("qtype", frozenset({1}))), Lit(1)),
        Compare("==", Count(Scope.of(2), AttrIn("level", frozenset({2}))), Lit(0)),
        Compare("<", Sum(Scope.of(1), "duration"), Lit(15)),
        Compare("!=", Overlap(1, 2), Lit(0)),
    ]
    for _ in range(100):
        conf = MultiConfiguration(tuple(
            tuple(rng.randint(1, 5) for _ in range(2)) for _ in range(2)))
        a, b = rng.sample(leaves, 2)
        va, vb = evaluate(a, conf, bank), evaluate(b, conf, bank)
        assert evaluate(And((a, b)), conf, bank) == (va and vb)
        assert evaluate(Or((a, b)), conf, bank) == (va or vb)
        assert evaluate(Not(a), conf, bank) == (not va)


def test_forall_instances_equals_conjunction():
    bank = bank5()
    body = Compare(">=", Count(Scope.of(CURRENT), AttrIn("qtype", frozenset({3}))), Lit(1))
    quantified = ForAllInstances(body)
    per_instance = [
        Compare(">=", Count(Scope.of(i), AttrIn("qtype", frozenset({3}))), Lit(1))
        for i in (1, 2)
    ]
    for vals in product(range(1, 6), repeat=4):
        conf = MultiConfiguration(((vals[0], vals[1]), (vals[2], vals[3])))
        assert evaluate(quantified, conf, bank) == all(
            evaluate(e, conf, bank) for e in per_instance)


def test_share_equals_count_over_scope_size_exactly():
    bank = bank5()
    pred = AttrIn("qtype", frozenset({1, 2}))
    rng = random.Random(3)
    for _ in range(60):
        conf = MultiConfiguration((tuple(rng.randint(1, 5) for _ in range(3)),))
        count = sum(1 for v in conf.exams[0] if v in bank.matching_ids(pred))
        for num, den in ((1, 3), (2, 3), (3, 10), (1, 2)):
            share_says = evaluate(
                Compare("<=", Share(Scope.of(1), pred), Lit(Fraction(num, den))), conf, bank)
            # cross-multiplied integer comparison must agree
            assert share_says == (count * den <= num * 3)


def test_overlap_symmetric_and_pure():
    bank = bank5()
    conf = MultiConfiguration(((1, 2, 3), (3, 4, 5)))
    for a, b in ((1, 2), (2, 1)):
        expr = Compare("==", Overlap(a, b), Lit(1))
        assert evaluate(expr, conf, bank)
        assert evaluate(expr, conf, bank)  # repeated call, same verdict


def test_pairwise_instances_binds_pairs():
    bank = bank5()
    disjoint = PairwiseInstances(Compare("==", Overlap(PAIR_FIRST, PAIR_SECOND), Lit(0)))
    assert evaluate(disjoint, MultiConfiguration(((1, 2), (3, 4))), bank)
    assert not evaluate(disjoint, MultiConfiguration(((1, 2), (2, 3))), bank)


def test_forall_slots_attribute_bound():
    bank = bank5()
    min_level2 = ForAllSlots(ALL_SLOTS, Compare(">=", AttrRef("level"), Lit(2)))
    assert evaluate(min_level2, MultiConfiguration(((2, 4),)), bank)   # levels 2,2
    assert not evaluate(min_level2, MultiConfiguration(((1, 2),)), bank)  # level 1 in slot 1


def test_alldifferent_slots_semantics():
    bank = bank5()
    expr = AllDifferentSlots(1)
    assert evaluate(expr, MultiConfiguration(((1, 2, 3),)), bank)
    assert not evaluate(expr, MultiConfiguration(((1, 2, 1),)), bank)


def test_configuration_totality_and_bank_membership():
    with pytest.raises(ModelError, match="missing slot"):
        MultiConfiguration.from_assignment({(1, 1): 1, (2, 2): 1})
    conf = MultiConfiguration.from_assignment({(1, 1): 1, (1, 2): 2})
    assert conf.exams == ((1, 2),)
    bank = bank5()
    with pytest.raises(ModelError, match="outside bank"):
        evaluate(Compare("==", Overlap(1, 1), Lit(1)), MultiConfiguration(((9,),)), bank)


def test_float_thresholds_rejected():
    with pytest.raises(ModelError, match="not exact"):
        Lit(0.3)
    assert Lit("0.3").value == Fraction(3, 10)
    assert Lit("3/10").value == Fraction(3, 10)


def test_evaluate_matches_brute_force_consistency():
    # random configurations against an exam-template task
    rng = random.Random(20)
    from gen import random_task
    task = random_task(rng)
    sols = set(brute_solutions(task))
    from gen import all_configurations
    for conf in all_configurations(task):
        assert is_consistent(conf, task) == (conf in sols)
