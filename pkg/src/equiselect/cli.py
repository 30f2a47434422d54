"""Command-line surface.

One executable, one subcommand per workflow: audit a selection, build a
balanced plan, lay out the five-option tradeoff menu, look up the parity
metric for a program context, run the rolling temporal evaluation,
synthesize a cohort, or serve the HTTP API.

Everything is configured by flags and JSON files, never environment
variables, so invocations are reproducible by copy-paste. Outputs are
identical bytes to the library and HTTP API for the same parameters.

Exit codes: 0 success, 1 invalid request or flags, 2 malformed input
data.
"""

from __future__ import annotations

import argparse
import csv
import datetime as dt
import sys
from dataclasses import replace
from pathlib import Path

from .balancer import (
    BY_ENTITY_ID,
    CONSTRAINT_LIST_SIZE,
    CONSTRAINT_RECALL_TARGET,
    CONSTRAINT_REFERENCE_RECALL,
    SEARCH_EXACT_BREAKPOINT,
    SEARCH_FIXED_STEP,
    SEEDED_RANDOM,
    BalanceSpec,
    Constraint,
)
from .cohort import (
    ENTITY_COL,
    Cohort,
    IngestConfig,
    parse_score_file,
    write_score_file,
)
from .errors import DataError, ValidationError
from .fairness_tree import (
    FOCUSES,
    NATURE_ASSISTIVE,
    NATURES,
    SCALE_SMALL,
    SCALE_SUBSTANTIAL,
    FairnessContext,
    recommend_metric,
)
from .metrics import audit_top_k
from .reporting import (
    FORMAT_JSON,
    FORMATS,
    build_tradeoff_menu,
    emit_report,
    run_balance_with_audit,
    to_json_bytes,
)
from .synth import SynthSpec, generate_population
from .temporal import (
    MODE_LENIENT,
    MODE_STRICT,
    RULE_MEAN_MINUS_STDDEV,
    RULES,
    SelectionRule,
    TemporalConfig,
    run_temporal_eval,
)

TIE_BREAK_FLAGS = {"entity-id": BY_ENTITY_ID, "seeded": SEEDED_RANDOM}
SEARCH_FLAGS = {"fixed-step": SEARCH_FIXED_STEP, "exact": SEARCH_EXACT_BREAKPOINT}
SCALE_FLAGS = {
    "small": SCALE_SMALL,
    SCALE_SMALL: SCALE_SMALL,
    "substantial": SCALE_SUBSTANTIAL,
}


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the contract here is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError as exc:
        raise ValidationError(f"invalid date {text!r}: {exc}") from exc


def _infer_schema(path: str) -> IngestConfig:
    """Every non-reserved header column is a group attribute. Custom
    column names need an explicit --schema file."""
    defaults = IngestConfig()
    reserved = {
        ENTITY_COL, defaults.score_col, defaults.label_col,
        defaults.date_col, defaults.model_col,
    }
    with open(path, "r", encoding="utf-8", newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header:
        raise DataError(f"{path}: empty score file (no header row)")
    return IngestConfig(attribute_cols=tuple(c for c in header if c not in reserved))


def _load_cohort(path: str, schema_path: str | None) -> Cohort:
    if schema_path is not None:
        schema = IngestConfig.from_json(Path(schema_path).read_text(encoding="utf-8"))
    else:
        schema = _infer_schema(path)
    return parse_score_file(path, schema)


def _write_bytes(data: bytes, out: str | None) -> None:
    if out is None:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    else:
        Path(out).write_bytes(data)


def _require_json_format(args, what: str) -> None:
    if args.format != FORMAT_JSON:
        raise ValidationError(f"{what} output is JSON only")


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_audit(args) -> int:
    cohort = _load_cohort(args.input, args.schema)
    report = audit_top_k(
        cohort,
        args.attribute,
        args.k,
        args.reference_group,
        TIE_BREAK_FLAGS[args.tie_break],
        args.seed,
    )
    emit_report(report, args.out, args.format)
    return 0


def _balance_constraint(args) -> Constraint:
    given = [
        name
        for name, value in (
            ("--k", args.k),
            ("--recall", args.recall),
            ("--ref-recall", args.ref_recall),
        )
        if value is not None
    ]
    if len(given) != 1:
        raise ValidationError(
            f"exactly one of --k, --recall, --ref-recall is required, got {given or 'none'}"
        )
    if args.k is not None:
        return Constraint(CONSTRAINT_LIST_SIZE, args.k)
    if args.recall is not None:
        return Constraint(CONSTRAINT_RECALL_TARGET, args.recall)
    return Constraint(CONSTRAINT_REFERENCE_RECALL, args.ref_recall)


def _cmd_balance(args) -> int:
    cohort = _load_cohort(args.input, args.schema)
    kwargs = {}
    if args.step is not None:
        kwargs["step_size"] = args.step
    if args.search is not None:
        kwargs["search_strategy"] = SEARCH_FLAGS[args.search]
    spec = BalanceSpec(
        mode=args.mode,
        constraint=_balance_constraint(args),
        reference_group=args.reference_group,
        tie_break=TIE_BREAK_FLAGS[args.tie_break],
        seed=args.seed,
        trim=args.trim,
        **kwargs,
    )
    outcome = run_balance_with_audit(cohort, args.attribute, spec)
    emit_report(outcome, args.out, args.format)
    return 0


def _cmd_tradeoff(args) -> int:
    cohort = _load_cohort(args.input, args.schema)
    menu = build_tradeoff_menu(
        cohort,
        args.attribute,
        args.k,
        args.reference_group,
        TIE_BREAK_FLAGS[args.tie_break],
        args.seed,
    )
    emit_report(menu, args.out, args.format)
    return 0


def _ask(prompt: str, choices: list[str]) -> str:
    menu = "\n".join(f"  {i + 1}. {c}" for i, c in enumerate(choices))
    while True:
        answer = input(f"{prompt}\n{menu}\n> ").strip()
        if answer in choices:
            return answer
        if answer.isdigit() and 1 <= int(answer) <= len(choices):
            return choices[int(answer) - 1]
        print(f"pick one of {choices}", file=sys.stderr)


def _interactive_context() -> FairnessContext:
    nature = _ask("Is the intervention punitive or assistive?", list(NATURES))
    scale = None
    if nature == NATURE_ASSISTIVE:
        scale = _ask(
            "Does the program reach a small fraction of need, or a substantial share?",
            ["small", "substantial"],
        )
        scale = SCALE_FLAGS[scale]
    focus = _ask("Whose experience is the fairness concern about?", list(FOCUSES))
    return FairnessContext(nature=nature, focus=focus, scale=scale)


def _cmd_tree(args) -> int:
    _require_json_format(args, "tree")
    if args.nature is None:
        if not sys.stdin.isatty():
            raise ValidationError("--nature is required (no terminal for the questionnaire)")
        ctx = _interactive_context()
    else:
        scale = SCALE_FLAGS[args.scale] if args.scale is not None else None
        focus = args.focus
        if focus is None:
            # A small assistive program gets the same recommendation for
            # every focus, so the flag may be omitted there.
            if args.nature == NATURE_ASSISTIVE and scale == SCALE_SMALL:
                focus = FOCUSES[0]
            else:
                raise ValidationError(
                    f"--focus is required for this context; choices: {list(FOCUSES)}"
                )
        ctx = FairnessContext(nature=args.nature, focus=focus, scale=scale)
    rec = recommend_metric(ctx, args.selection_fraction)
    _write_bytes(to_json_bytes(rec.to_payload()), args.out)
    return 0


def _load_model_file(path: str, schema_path: str | None) -> Cohort:
    cohort = _load_cohort(path, schema_path)
    if any(ex.model_id is not None for ex in cohort.examples):
        return cohort
    stem = Path(path).stem
    return Cohort(
        examples=tuple(replace(ex, model_id=stem) for ex in cohort.examples),
        attributes=cohort.attributes,
        provenance=cohort.provenance,
    )


def _cmd_temporal_eval(args) -> int:
    cohorts = [_load_model_file(p, args.schema) for p in args.inputs]
    attrs = cohorts[0].attributes
    for path, c in zip(args.inputs, cohorts):
        if c.attributes != attrs:
            raise DataError(
                f"attribute columns differ across inputs: {attrs} vs "
                f"{c.attributes} in {path}"
            )
    examples = tuple(ex for c in cohorts for ex in c.examples)
    cohort = cohorts[0] if len(cohorts) == 1 else Cohort(examples, attrs)

    cfg = TemporalConfig(
        start_date=_parse_date(args.start),
        end_date=_parse_date(args.end),
        interval_months=args.interval_months,
        label_window_months=args.label_window_months,
        k=args.k,
    )
    lambda_ = args.lambda_
    if lambda_ is None and args.rule == RULE_MEAN_MINUS_STDDEV:
        lambda_ = 1.0
    rule = SelectionRule(rule=args.rule, lambda_=lambda_)
    result = run_temporal_eval(
        cohort,
        cfg,
        rule,
        MODE_LENIENT if args.lenient else MODE_STRICT,
        TIE_BREAK_FLAGS[args.tie_break],
        args.seed,
    )
    emit_report(result, args.out, args.format)
    return 0


def _cmd_synth(args) -> int:
    spec = SynthSpec.from_json(Path(args.spec).read_text(encoding="utf-8"))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    cohort = generate_population(spec)
    if args.out is None:
        write_score_file(cohort, sys.stdout)
    else:
        write_score_file(cohort, args.out)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import build_snapshot, create_app

    snapshot = build_snapshot(_load_cohort(args.input, args.schema))
    app = create_app(snapshot, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# Parser wiring


def _add_tie_break(p) -> None:
    p.add_argument(
        "--tie-break",
        choices=sorted(TIE_BREAK_FLAGS),
        default="entity-id",
        help="how equal scores are ordered (default: entity-id)",
    )


def _add_schema(p) -> None:
    p.add_argument(
        "--schema", default=None,
        help="column-mapping JSON; by default every non-reserved column "
             "is a group attribute",
    )


def build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="tie-break seed")
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument(
        "--format", choices=FORMATS, default=FORMAT_JSON,
        help="output format (default: json)",
    )

    parser = _Parser(
        prog="equiselect",
        description="Audit, balance, and explore top-k selections by group.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("audit", parents=[common], help="audit a top-k selection")
    p.add_argument("--input", required=True, help="score file (CSV)")
    p.add_argument("--attribute", required=True, help="group attribute column")
    p.add_argument("--k", type=int, required=True, help="selection size")
    p.add_argument("--reference-group", default=None)
    _add_schema(p)
    _add_tie_break(p)
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("balance", parents=[common], help="build a balanced selection plan")
    p.add_argument("--input", required=True, help="score file (CSV)")
    p.add_argument("--attribute", required=True, help="group attribute column")
    p.add_argument("--mode", choices=["equalized", "proportional"], required=True)
    p.add_argument("--k", type=int, default=None, help="total list size")
    p.add_argument("--recall", type=float, default=None, help="recall target per group")
    p.add_argument("--ref-recall", type=float, default=None,
                   help="recall for the reference group, scaled to the rest")
    p.add_argument("--reference-group", default=None)
    p.add_argument("--step", type=float, default=None,
                   help="step size for the fixed-step search")
    p.add_argument("--search", choices=sorted(SEARCH_FLAGS), default=None,
                   help="search strategy for proportional --k plans")
    p.add_argument("--trim", action="store_true",
                   help="drop trailing entries that add no recall")
    _add_schema(p)
    _add_tie_break(p)
    p.set_defaults(func=_cmd_balance)

    p = sub.add_parser("tradeoff", parents=[common],
                       help="five-option equity/efficiency menu")
    p.add_argument("--input", required=True, help="score file (CSV)")
    p.add_argument("--attribute", required=True, help="group attribute column")
    p.add_argument("--k", type=int, required=True, help="current program scale")
    p.add_argument("--reference-group", default=None)
    _add_schema(p)
    _add_tie_break(p)
    p.set_defaults(func=_cmd_tradeoff)

    p = sub.add_parser("tree", parents=[common],
                       help="parity metric recommendation for a program context")
    p.add_argument("--nature", choices=list(NATURES), default=None)
    p.add_argument("--scale", choices=["small", "substantial", SCALE_SMALL],
                   default=None)
    p.add_argument("--focus", choices=list(FOCUSES), default=None)
    p.add_argument("--selection-fraction", type=float, default=None,
                   help="k over population size, for degeneracy hints")
    p.set_defaults(func=_cmd_tree)

    p = sub.add_parser("temporal-eval", parents=[common],
                       help="rolling-window model evaluation")
    p.add_argument("--inputs", nargs="+", required=True,
                   help="score files; file stem names the model when no model_id column")
    p.add_argument("--start", required=True, help="first modeling date (ISO)")
    p.add_argument("--end", required=True, help="last modeling date (ISO)")
    p.add_argument("--interval-months", type=int, required=True)
    p.add_argument("--label-window-months", type=int, required=True)
    p.add_argument("--k", type=int, required=True, help="list size per split")
    p.add_argument("--rule", choices=list(RULES), default=RULE_MEAN_MINUS_STDDEV)
    p.add_argument("--lambda", dest="lambda_", type=float, default=None,
                   help="stddev penalty weight (default 1.0)")
    p.add_argument("--lenient", action="store_true",
                   help="evaluate splits smaller than k at their actual size")
    _add_schema(p)
    _add_tie_break(p)
    p.set_defaults(func=_cmd_temporal_eval)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic cohort")
    p.add_argument("--spec", required=True, help="synthesis spec (JSON)")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("serve", parents=[common], help="serve the HTTP API")
    p.add_argument("--input", required=True, help="score file (CSV)")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--static-dir", default=None,
                   help="directory of UI assets to serve at /")
    _add_schema(p)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits directly for usage errors and --help; keep main
        # returning an exit code so it can be driven in-process.
        return int(exc.code or 0)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"equiselect: data error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"equiselect: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"equiselect: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
