"""Command-line entry point.

Exit codes: 0 success, 1 domain error (invalid model, inapplicable
sequence, missing runs, ...), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .antipatterns import DEFAULT_THRESHOLDS, DetectionConfig, count_pas, detect
from .experiment import (
    ExperimentSpec,
    MissingRuns,
    cmd_optimize,
    cmd_report,
    default_variants,
    front_to_csv,
    read_front,
    report_csv,
    report_text,
    variant_front,
)
from .lqn.export import dump as dump_lqn
from .lqn.model import InvalidModel
from .lqn.solver import solve
from .lqn.transform import transform
from .model import (
    ModelError,
    ParseError,
    ValidationReport,
    Violation,
    load_model,
    model_from_dict,
    model_to_dict,
    schema_errors,
    validate,
)
from .optimizer import OptimizationError, OptimizerConfig, reference_front
from .refactoring import RefactoringSequence, apply_sequence
from .reliability import evaluate_reliability

log = logging.getLogger("perfrefactor")


class UsageError(Exception):
    pass


def _emit(doc, args) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if getattr(args, "output", None):
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load(path: str):
    try:
        return load_model(path)
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {path}") from exc


def cmd_validate(args) -> int:
    try:
        doc = json.loads(Path(args.model).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {args.model}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.model}: {exc}") from exc
    errors = schema_errors(doc)
    if errors:
        report = ValidationReport(tuple(Violation("<document>", "schema", e) for e in errors))
    else:
        report = validate(model_from_dict(doc))
    _emit(report.to_dict(), args)
    return 0 if report.ok else 1


def cmd_solve(args) -> int:
    lqn = transform(_load(args.model))
    if args.dump_lqn:
        print(f"wrote {dump_lqn(lqn, args.dump_lqn)}", file=sys.stderr)
    _emit(solve(lqn).to_dict(), args)
    return 0


def cmd_reliability(args) -> int:
    _emit(evaluate_reliability(_load(args.model)).to_dict(), args)
    return 0


def cmd_detect(args) -> int:
    model = _load(args.model)
    results = solve(transform(model))
    cfg = DetectionConfig(fuzziness_threshold=args.fuzziness, mode=args.mode, aggregate=args.aggregate)
    found = detect(model, results, cfg)
    _emit({
        "threshold": cfg.threshold,
        "count": count_pas(found, cfg),
        "instances": [i.to_dict() for i in found],
    }, args)
    return 0


def cmd_apply(args) -> int:
    model = _load(args.model)
    try:
        seq = RefactoringSequence.from_json(Path(args.sequence).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise UsageError(f"no such file: {args.sequence}") from exc
    except (ValueError, json.JSONDecodeError) as exc:
        raise ParseError(f"{args.sequence}: {exc}") from exc
    _emit(model_to_dict(apply_sequence(seq, model)), args)
    return 0


def _base_config(args) -> OptimizerConfig:
    return OptimizerConfig(
        population_size=args.population,
        sequence_length=args.length,
        p_crossover=args.p_crossover,
        p_mutation=args.p_mutation,
        generations=args.generations,
        runs=args.runs,
        seed=args.seed,
        threads=args.threads,
    )


def cmd_optimize_cli(args) -> int:
    base = _base_config(args)
    out = args.output or "experiment"
    if args.spec:
        doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        doc.setdefault("output", out)
        doc.setdefault("runs", args.runs)
        spec = ExperimentSpec.from_dict(doc, base)
    else:
        if not args.model:
            raise UsageError("optimize needs a model path or --spec")
        variants = default_variants(
            base,
            fuzziness=tuple(args.fuzziness),
            with_pas=args.pas in ("with", "both"),
            without_pas=args.pas in ("without", "both"),
        )
        spec = ExperimentSpec(args.model, variants, out, args.runs)
    try:
        manifest = cmd_optimize(spec)
    except KeyboardInterrupt:
        print(f"interrupted; partial results kept under {out}", file=sys.stderr)
        return 130
    sys.stdout.write(json.dumps(
        {"output": out, "models_evaluated": manifest["models_evaluated"], "wall_time_s": manifest["wall_time_s"]},
        sort_keys=True,
    ) + "\n")
    return 0


def cmd_report_cli(args) -> int:
    rows = cmd_report(args.experiment)
    text = report_csv(rows) if args.format == "csv" else report_text(rows)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_rpf(args) -> int:
    fronts = []
    for p in map(Path, args.inputs):
        if p.is_dir():
            fronts.append(variant_front(p))
        elif p.exists():
            fronts.append(read_front(p))
        else:
            raise UsageError(f"no such file or directory: {p}")
    text = front_to_csv(reference_front(fronts))
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommands repeat the global flags; SUPPRESS keeps a value given
    # before the subcommand from being reset by the subparser's default
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=d(0), help="base random seed")
    g.add_argument("--threads", type=int, default=d(1), help="evaluation threads")
    g.add_argument("--output", "-o", default=d(None), help="output file (directory for optimize)")
    g.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(suppress=True)
    p = argparse.ArgumentParser(prog="perfrefactor", description=__doc__.splitlines()[0], parents=[_global_flags(False)])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", parents=[common], help="check a model file")
    s.add_argument("model")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("solve-lqn", parents=[common], help="transform and solve the performance model")
    s.add_argument("model")
    s.add_argument("--dump-lqn", metavar="DIR", help="also write the generated LQN in text form into DIR")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("reliability", parents=[common], help="system reliability")
    s.add_argument("model")
    s.set_defaults(func=cmd_reliability)

    s = sub.add_parser("detect", parents=[common], help="performance antipatterns")
    s.add_argument("model")
    s.add_argument("--fuzziness", type=float, default=0.80)
    s.add_argument("--mode", choices=("fuzzy", "deterministic"), default="fuzzy")
    s.add_argument("--aggregate", choices=("count", "sum"), default="count")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("apply", parents=[common], help="apply a refactoring sequence")
    s.add_argument("model")
    s.add_argument("sequence", help="JSON list of actions")
    s.set_defaults(func=cmd_apply)

    s = sub.add_parser("optimize", parents=[common], help="run an experiment")
    s.add_argument("model", nargs="?")
    s.add_argument("--spec", help="experiment spec JSON (model, runs, variants)")
    s.add_argument("--runs", type=int, default=1, help="seeded runs per variant")
    s.add_argument("--generations", type=int, default=100)
    s.add_argument("--population", type=int, default=16)
    s.add_argument("--length", type=int, default=4, help="sequence length")
    s.add_argument("--p-crossover", type=float, default=0.8)
    s.add_argument("--p-mutation", type=float, default=0.2)
    s.add_argument("--fuzziness", type=float, nargs="+", default=list(DEFAULT_THRESHOLDS))
    s.add_argument("--pas", choices=("with", "without", "both"), default="both",
                   help="variants with and/or without the antipattern objective")
    s.set_defaults(func=cmd_optimize_cli)

    s = sub.add_parser("report", parents=[common], help="summary table of an experiment")
    s.add_argument("experiment")
    s.add_argument("--format", choices=("text", "csv"), default="text")
    s.set_defaults(func=cmd_report_cli)

    s = sub.add_parser("rpf", parents=[common], help="merge fronts into a reference front")
    s.add_argument("inputs", nargs="+", help="pareto/rpf CSV files or variant directories")
    s.set_defaults(func=cmd_rpf)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ModelError as exc:
        report = getattr(exc, "report", None)
        if report is not None:
            sys.stdout.write(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InvalidModel, MissingRuns, OptimizationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
