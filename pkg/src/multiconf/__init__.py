"""multiconf: configure many instances of one product type at once.

A finite-domain constraint engine for tasks that produce a *set* of
configurations under shared cross-instance constraints, with a complete
exam-assembly adapter (question banks, share/duration/overlap templates),
conflict-driven diagnosis of infeasible requirement sets, and a CLI.
"""

from .model import (
    ALL_SLOTS,
    AllDifferentSlots,
    And,
    AttrCmp,
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
    SlotVar,
    Sum,
    build_task,
    evaluate,
    is_consistent,
    violated_ids,
)
from .propagate import (
    DomainStore,
    FixpointResult,
    Outcome,
    Propagator,
    UnaryFilter,
    compile_propagators,
    compile_unary,
    fixpoint,
    init_store,
    propagate_alldiff,
    propagate_choice,
    propagate_count,
    propagate_sum,
    share_count_band,
)
from .search import (
    EnumerateResult,
    SearchConfig,
    SearchStats,
    SolveResult,
    SolveStatus,
    choose_variable,
    enumerate_solutions,
    order_values,
    solve,
)
from .diagnose import (
    BackgroundInconsistentError,
    Conflict,
    Diagnosis,
    DiagnosisReport,
    UnknownVerdictError,
    Verdict,
    check,
    diagnose_report,
    diagnoses,
    fast_diag,
    min_conflict,
)
from .exam import (
    BankLoadError,
    CompiledExam,
    ExamModel,
    ExamReport,
    SolutionStats,
    Template,
    compile_model,
    load_bank,
    load_bank_with_remap,
    report,
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
from .taskfile import TaskFileError, load_exam_model, read_solutions

__version__ = "0.1.0"
