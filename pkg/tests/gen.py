"""Random small tasks and brute-force oracles shared by the test modules.

The brute-force side deliberately goes through nothing but itertools and
the reference evaluator, so it is an independent check on the propagation
and search stack.
"""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import combinations, product

from multiconf.exam import (
    CompiledExam,
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
    MultiConfigTask,
    MultiConfiguration,
    Owner,
    Question,
    QuestionBank,
    is_consistent,
)

BOUNDS = (0, Fraction(1, 4), Fraction(3, 10), Fraction(1, 3), Fraction(1, 2),
          Fraction(2, 3), 1)


def random_bank(rng: random.Random, p: int | None = None) -> QuestionBank:
    p = p or rng.randint(3, 6)
    q_bar = rng.randint(2, 3)
    r = rng.randint(2, 3)
    questions = [
        Question(i, rng.randint(1, q_bar), rng.randint(1, r), rng.randint(1, 5))
        for i in range(1, p + 1)
    ]
    return QuestionBank(tuple(questions), q_bar, r)


def random_exam_model(rng: random.Random, *, max_kl: int | None = None,
                      force_requirements: bool = False) -> ExamModel:
    """A random small model drawing from all ten templates."""
    bank = random_bank(rng)
    while True:
        k = rng.randint(1, 2)
        l = rng.randint(1, 3)
        if l <= bank.p and (max_kl is None or k * l <= max_kl):
            break

    def owner():
        roll = rng.random()
        if roll < 0.45:
            return Owner.examinee(rng.randint(1, k))
        if roll < 0.6:
            return Owner.instructor()
        return None

    candidates = []
    cats = lambda: rng.sample(range(1, bank.q_bar + 1), rng.randint(1, bank.q_bar))
    candidates.append(lambda: tmpl_share_max(owner(), rng.randint(1, k), cats(),
                                             rng.choice(BOUNDS)))
    candidates.append(lambda: tmpl_exclude_type(
        owner(), rng.choice([None, rng.randint(1, k)]), rng.randint(1, bank.q_bar)))
    candidates.append(lambda: tmpl_usage_cap(rng.randint(1, bank.p), rng.randint(0, 2)))
    candidates.append(lambda: tmpl_require_one_of(
        rng.sample(range(1, bank.p + 1), rng.randint(1, 2))))
    candidates.append(lambda: tmpl_min_level(rng.randint(1, bank.r)))
    candidates.append(lambda: tmpl_min_type_count(rng.randint(1, bank.q_bar),
                                                  rng.randint(0, l)))
    candidates.append(lambda: tmpl_duration(rng.choice([None, rng.randint(1, k)]),
                                            rng.randint(0, 3 * l),
                                            rng.randint(3 * l, 5 * l)))
    candidates.append(lambda: tmpl_share_range(
        rng.choice([None, rng.randint(1, k)]), rng.randint(1, bank.r),
        *sorted(rng.sample(BOUNDS, 2))))
    candidates.append(lambda: tmpl_unique_per_exam())
    candidates.append(lambda: tmpl_pairwise_overlap(
        rng.choice(["at_most", "at_least"]), rng.choice(BOUNDS)))

    templates = [make() for make in candidates if rng.random() < 0.4]
    model = ExamModel(bank, k, l, tuple(templates))
    if force_requirements and not any(t.owner for t in templates):
        extra = tmpl_exclude_type(Owner.examinee(rng.randint(1, k)), None,
                                  rng.randint(1, bank.q_bar))
        model = ExamModel(bank, k, l, tuple(templates) + (extra,))
    return model


def random_task(rng: random.Random, **kwargs) -> MultiConfigTask:
    return compile_model(random_exam_model(rng, **kwargs)).task


def all_configurations(task: MultiConfigTask):
    n = task.k * task.l
    for values in product(range(1, task.bank.p + 1), repeat=n):
        yield MultiConfiguration(tuple(
            tuple(values[i * task.l:(i + 1) * task.l]) for i in range(task.k)
        ))


def brute_solutions(task: MultiConfigTask) -> list[MultiConfiguration]:
    return [conf for conf in all_configurations(task) if is_consistent(conf, task)]


def brute_satisfiable(task: MultiConfigTask, ids) -> bool:
    sub = task.restricted(ids)
    return any(is_consistent(conf, sub) for conf in all_configurations(sub))


def brute_min_conflicts(task: MultiConfigTask, background, candidates) -> set[frozenset]:
    """All subset-minimal candidate sets inconsistent together with the
    background, by exhaustive lattice walk."""
    background = tuple(background)
    candidates = tuple(candidates)
    inconsistent = set()
    for size in range(1, len(candidates) + 1):
        for combo in combinations(candidates, size):
            s = frozenset(combo)
            if any(other <= s for other in inconsistent):
                continue
            if not brute_satisfiable(task, set(background) | s):
                inconsistent.add(s)
    return inconsistent


def brute_min_diagnoses(task: MultiConfigTask, requirements, base) -> set[frozenset]:
    """All subset-minimal requirement sets whose removal restores
    consistency, by exhaustive lattice walk."""
    requirements = tuple(requirements)
    base = tuple(base)
    minimal = set()
    for size in range(0, len(requirements) + 1):
        for combo in combinations(requirements, size):
            removed = frozenset(combo)
            if any(small <= removed for small in minimal):
                continue
            keep = [r for r in requirements if r not in removed]
            if brute_satisfiable(task, set(base) | set(keep)):
                minimal.add(removed)
    return minimal
