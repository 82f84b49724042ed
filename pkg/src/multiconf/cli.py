"""Command-line front end: validate, solve, diagnose, stats.

Exit codes are a stable contract: 0 success, 1 proven-unsatisfiable,
2 input error, 3 unknown (search limits), 4 background inconsistent during
diagnosis, 5 solution verification failure.  Machine output goes to files,
human text to stdout/stderr.  MULTICONF_SEED provides a default seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .diagnose import (
    BackgroundInconsistentError,
    UnknownVerdictError,
    diagnose_report,
)
from .exam import CompiledExam, compile_model, report
from .model import ModelError, violated_ids
from .search import SearchConfig, enumerate_solutions
from .taskfile import (
    TaskFileError,
    load_exam_model,
    read_solutions,
    write_solutions_csv,
    write_solutions_json,
)

EXIT_OK = 0
EXIT_UNSAT = 1
EXIT_INPUT = 2
EXIT_UNKNOWN = 3
EXIT_BACKGROUND = 4
EXIT_VERIFY = 5


def _default_seed() -> int:
    raw = os.environ.get("MULTICONF_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ModelError(f"MULTICONF_SEED must be an integer, got {raw!r}") from None


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_compiled(model_path: str) -> tuple[CompiledExam, object]:
    model = load_exam_model(model_path)
    compiled = compile_model(model)
    return compiled, model


def _print_warnings(compiled: CompiledExam) -> None:
    for w in compiled.warnings:
        print(f"warning: {w}")


# --- validate -----------------------------------------------------------------


def cmd_validate(args) -> int:
    compiled, model = _load_compiled(args.model)
    task = compiled.task
    print(f"model ok: bank p={task.bank.p} (q_bar={task.bank.q_bar}, r={task.bank.r}), "
          f"k={task.k} examinees x l={task.l} slots")
    for req in task.requirements:
        print(f"  REQ {compiled.describe(req.id)}")
    for con in task.constraints:
        print(f"  C   {compiled.describe(con.id)}")
    _print_warnings(compiled)
    return EXIT_OK


# --- solve ---------------------------------------------------------------------


def _manifest(model_path: Path, cfg: SearchConfig, result, n_solutions: int,
              out_path: Path, fmt: str) -> dict:
    status = "sat" if n_solutions else ("unsat" if result.exhausted else "unknown")
    return {
        "tool": "multiconf",
        "version": __version__,
        "command": "solve",
        "input": {"path": str(model_path), "sha256": _sha256(model_path)},
        "seed": cfg.seed,
        "search": {
            "max_solutions": cfg.max_solutions,
            "node_limit": cfg.node_limit,
            "time_limit_ms": cfg.time_limit_ms,
            "symmetry_breaking": cfg.symmetry_breaking,
            "value_order": cfg.value_order,
        },
        "output": {"path": str(out_path), "format": fmt},
        "outcome": {
            "status": status,
            "solutions": n_solutions,
            "nodes": result.stats.nodes,
            "failures": result.stats.failures,
            "fixpoints": result.stats.propagation_fixpoints,
            "exhausted": result.exhausted,
            "limit_hit": result.limit_hit,
        },
        "timing": {
            "elapsed_ms": round(result.stats.elapsed_ms, 3),
            "created_at": datetime.now(timezone.utc).isoformat(),
        },
    }


def cmd_solve(args) -> int:
    compiled, _model = _load_compiled(args.model)
    _print_warnings(compiled)
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = SearchConfig(
        seed=seed,
        max_solutions=args.max_solutions,
        node_limit=args.node_limit,
        time_limit_ms=args.time_limit_ms,
        symmetry_breaking=not args.no_symmetry_breaking,
        value_order=args.value_order,
    )
    result = enumerate_solutions(compiled.task, cfg)

    fmt = args.format
    out_path = Path(args.out) if args.out else Path(f"solutions.{fmt}")
    if result.solutions:
        if fmt == "json":
            write_solutions_json(out_path, result.solutions)
        else:
            write_solutions_csv(out_path, result.solutions)
    manifest_path = out_path.with_name(out_path.stem + ".manifest.json")
    model_path = Path(args.model)
    manifest = _manifest(model_path, cfg, result, len(result.solutions), out_path, fmt)
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    stats = result.stats
    if result.solutions:
        print(f"{len(result.solutions)} solution(s) -> {out_path} "
              f"({stats.nodes} nodes, {stats.failures} failures, "
              f"{stats.elapsed_ms:.0f} ms); manifest -> {manifest_path}")
        return EXIT_OK
    if result.exhausted:
        print(f"unsatisfiable ({stats.nodes} nodes); "
              f"run `multiconf diagnose {args.model}` to see why; "
              f"manifest -> {manifest_path}")
        return EXIT_UNSAT
    print(f"unknown: search limits exhausted after {stats.nodes} nodes; "
          f"manifest -> {manifest_path}")
    return EXIT_UNKNOWN


# --- diagnose --------------------------------------------------------------------


def cmd_diagnose(args) -> int:
    compiled, _model = _load_compiled(args.model)
    task = compiled.task
    if args.foreground == "requirements":
        foreground = [r.id for r in task.requirements]
        background = [c.id for c in task.constraints]
    else:
        foreground = [r.id for r in task.requirements] + [c.id for c in task.constraints]
        background = []

    try:
        rep = diagnose_report(foreground, background, task,
                              max_n=args.max_diagnoses, node_limit=args.node_limit)
    except BackgroundInconsistentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("hint: rerun with --foreground all to diagnose the model "
              "constraints themselves", file=sys.stderr)
        return EXIT_BACKGROUND

    if not rep.diagnoses and not rep.conflicts:
        print("consistent: no conflicts")
        return EXIT_OK
    print(f"inconsistent: {len(rep.conflicts)} minimal conflict(s), "
          f"{len(rep.diagnoses)} minimal diagnosis/es (max {args.max_diagnoses})")
    for n, conflict in enumerate(rep.conflicts, start=1):
        print(f"conflict {n}:")
        for cid in sorted(conflict.ids):
            print(f"  - {compiled.describe(cid)}")
    for n, diag in enumerate(rep.diagnoses, start=1):
        print(f"diagnosis {n} (remove {len(diag.ids)}):")
        for cid in sorted(diag.ids):
            print(f"  - {compiled.describe(cid)}")
    return EXIT_OK


# --- stats -----------------------------------------------------------------------


def _write_report_csvs(rep, out_dir: Path) -> list[Path]:
    files = []

    def write(name: str, header: str, rows) -> None:
        path = out_dir / name
        path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
        files.append(path)

    write("durations.csv", "solution,examinee,total_duration",
          [f"{n},{i + 1},{d}"
           for n, s in enumerate(rep.sets) for i, d in enumerate(s.durations)])
    write("types.csv", "solution,examinee,type,count",
          [f"{n},{i + 1},{t + 1},{c}"
           for n, s in enumerate(rep.sets)
           for i, hist in enumerate(s.type_hist) for t, c in enumerate(hist)])
    write("levels.csv", "solution,examinee,level,count",
          [f"{n},{i + 1},{t + 1},{c}"
           for n, s in enumerate(rep.sets)
           for i, hist in enumerate(s.level_hist) for t, c in enumerate(hist)])
    write("overlap.csv", "solution,examinee_a,examinee_b,shared_questions",
          [f"{n},{a + 1},{b + 1},{v}"
           for n, s in enumerate(rep.sets)
           for a, row in enumerate(s.overlap) for b, v in enumerate(row)])
    write("usage.csv", "question,slots_filled",
          [f"{q + 1},{c}" for q, c in enumerate(rep.usage)])
    return files


def cmd_stats(args) -> int:
    compiled, model = _load_compiled(args.model)
    solutions = read_solutions(args.solutions)
    if not solutions:
        print("error: solutions file is empty", file=sys.stderr)
        return EXIT_INPUT

    for n, conf in enumerate(solutions):
        try:
            bad = violated_ids(conf, compiled.task)
        except ModelError as exc:
            print(f"error: solution {n} failed verification: {exc}", file=sys.stderr)
            return EXIT_VERIFY
        if bad:
            names = "; ".join(compiled.describe(cid) for cid in bad)
            print(f"error: solution {n} violates {names}", file=sys.stderr)
            return EXIT_VERIFY

    rep = report(solutions, model)
    out_dir = Path(args.out_dir) if args.out_dir else (
        Path(args.solutions).parent / (Path(args.solutions).stem + "_report"))
    out_dir.mkdir(parents=True, exist_ok=True)
    files = _write_report_csvs(rep, out_dir)
    if not args.no_figures:
        from .figures import render_report  # deferred: matplotlib is heavy

        files += render_report(rep, model, out_dir)

    for n, s in enumerate(rep.sets):
        durs = ", ".join(str(d) for d in s.durations)
        off_diag = [v for a, row in enumerate(s.overlap)
                    for b, v in enumerate(row) if a < b]
        worst = max(off_diag) if off_diag else 0
        print(f"solution {n}: durations [{durs}] min; max pairwise overlap {worst}")
    used = sum(1 for c in rep.usage if c)
    print(f"bank usage: {used}/{len(rep.usage)} questions appear at least once")
    print(f"report written to {out_dir} ({len(files)} files)")
    return EXIT_OK


# --- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiconf",
        description="Solve, enumerate, and diagnose multi-instance "
                    "configuration tasks (exam assembly and friends).",
    )
    parser.add_argument("--version", action="version", version=f"multiconf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and compile a model file")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="find one or more exam sets")
    p.add_argument("model")
    p.add_argument("--seed", type=int, default=None,
                   help="search seed (default: $MULTICONF_SEED or 0)")
    p.add_argument("--max-solutions", type=int, default=1, metavar="N")
    p.add_argument("--out", default=None, metavar="PATH",
                   help="solutions file (default solutions.<format>)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--node-limit", type=int, default=None, metavar="N")
    p.add_argument("--time-limit-ms", type=int, default=None, metavar="MS")
    p.add_argument("--value-order", choices=("lexicographic", "seeded_shuffle"),
                   default="seeded_shuffle")
    p.add_argument("--no-symmetry-breaking", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("diagnose", help="explain an infeasible model")
    p.add_argument("model")
    p.add_argument("--foreground", choices=("requirements", "all"),
                   default="requirements",
                   help="which constraints are candidates for removal")
    p.add_argument("--max-diagnoses", type=int, default=10, metavar="N")
    p.add_argument("--node-limit", type=int, default=200_000, metavar="N")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("stats", help="audit a solutions file and render the report")
    p.add_argument("solutions")
    p.add_argument("model")
    p.add_argument("--out-dir", default=None, metavar="DIR")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnknownVerdictError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN
    except (TaskFileError, ModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
