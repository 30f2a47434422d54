"""Report emission: the five-option tradeoff menu and the file writers.

The menu puts one unadjusted top-K audit next to four balanced plans,
two that expand the list until recall targets are met and two that hold
the list at K. Every scenario carries the audit of its own realized
selection, so the equity-versus-efficiency cost is read straight off
the report rather than recomputed by the consumer.

Writers emit JSON (canonical bytes, shared with the HTTP API), flat CSV,
or long-format plot data. Floats serialize via repr, which round-trips
exactly.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Union

from .balancer import (
    BY_ENTITY_ID,
    CONSTRAINT_LIST_SIZE,
    CONSTRAINT_RECALL_TARGET,
    CONSTRAINT_REFERENCE_RECALL,
    MODE_EQUALIZED,
    MODE_PROPORTIONAL,
    MODE_UNADJUSTED,
    BalanceSpec,
    Constraint,
    GroupQuota,
    SEARCH_MERGED_PREFIX,
    SelectionPlan,
    build_curves,
    realize_selection,
    run_balance,
    trim_trailing_negatives,
)
from .cohort import Cohort
from .errors import ValidationError
from .metrics import (
    AuditReport,
    audit_selection,
    audit_top_k,
    default_reference_group,
    stats_by_group,
)
from .temporal import TemporalEvalResult

SCENARIO_TOP_K = "top_k_unadjusted"
SCENARIO_EXPANDED_EQUALIZED = "expanded_equalized"
SCENARIO_EXPANDED_PROPORTIONAL = "expanded_proportional"
SCENARIO_CURRENT_EQUALIZED = "current_scale_equalized"
SCENARIO_CURRENT_PROPORTIONAL = "current_scale_proportional"

SCENARIO_LABELS = (
    SCENARIO_TOP_K,
    SCENARIO_EXPANDED_EQUALIZED,
    SCENARIO_EXPANDED_PROPORTIONAL,
    SCENARIO_CURRENT_EQUALIZED,
    SCENARIO_CURRENT_PROPORTIONAL,
)

FORMAT_JSON = "json"
FORMAT_CSV = "csv"
FORMAT_PLOTDATA = "plotdata"
FORMATS = (FORMAT_JSON, FORMAT_CSV, FORMAT_PLOTDATA)


def to_json_bytes(payload) -> bytes:
    """Canonical JSON encoding used by both the CLI and the HTTP API,
    so equal payloads are equal bytes."""
    text = json.dumps(
        payload,
        indent=2,
        ensure_ascii=False,
        allow_nan=False,
        separators=(",", ": "),
    )
    return (text + "\n").encode("utf-8")


@dataclass(frozen=True)
class TradeoffScenario:
    label: str
    plan: SelectionPlan
    audit: AuditReport
    notes: tuple[str, ...] = ()
    # Overall precision minus the unadjusted top-K scenario's, so the
    # efficiency cost of a plan is a reported number, not consumer
    # arithmetic. None when either precision is undefined; 0.0 on the
    # baseline itself.
    precision_delta_vs_unadjusted: float | None = None

    @property
    def total(self) -> int:
        return self.plan.total

    @property
    def overall_precision(self) -> float | None:
        return self.audit.overall_precision

    def to_payload(self) -> dict:
        return {
            "label": self.label,
            "total": self.total,
            "overall_precision": self.overall_precision,
            "precision_delta_vs_unadjusted": self.precision_delta_vs_unadjusted,
            "plan": self.plan.to_payload(),
            "audit": self.audit.to_payload(),
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class TradeoffMenu:
    attribute: str
    k: int
    reference_group: str
    tie_break: str
    seed: int | None
    scenarios: tuple[TradeoffScenario, ...]

    def scenario(self, label: str) -> TradeoffScenario:
        for s in self.scenarios:
            if s.label == label:
                return s
        raise KeyError(label)

    def to_payload(self) -> dict:
        return {
            "attribute": self.attribute,
            "k": self.k,
            "reference_group": self.reference_group,
            "tie_break": self.tie_break,
            "seed": self.seed,
            "scenarios": [s.to_payload() for s in self.scenarios],
        }


@dataclass(frozen=True)
class BalanceOutcome:
    """A plan bundled with the audit of its realized selection; the
    document the `balance` command and POST /api/balance both emit."""

    plan: SelectionPlan
    audit: AuditReport

    def to_payload(self) -> dict:
        return {**self.plan.to_payload(), "audit": self.audit.to_payload()}


def run_balance_with_audit(
    cohort: Cohort, attribute: str, spec: BalanceSpec
) -> BalanceOutcome:
    plan = run_balance(cohort, attribute, spec)
    ids = realize_selection(plan, cohort, attribute, spec.tie_break, spec.seed)
    audit = audit_selection(cohort, attribute, ids, spec.reference_group)
    return BalanceOutcome(plan=plan, audit=audit)


def _unadjusted_plan(
    base: AuditReport, curves, k: int, tie_break: str, seed: int | None
) -> SelectionPlan:
    # Group members of the global top-K are that group's own top
    # `selected` entries, so per-group counts describe it exactly.
    quotas = []
    for cat in sorted(curves):
        selected = base.row(cat).metrics.selected
        quotas.append(
            GroupQuota(
                group=cat,
                k=selected,
                target_recall=None,
                achieved_recall=curves[cat].recall_at(selected),
            )
        )
    return SelectionPlan(
        mode=MODE_UNADJUSTED,
        constraint=Constraint(CONSTRAINT_LIST_SIZE, k),
        quotas=tuple(quotas),
        tie_break=tie_break,
        seed=seed,
        requested_k=k,
    )


def _precision_delta(
    precision: float | None, baseline: float | None
) -> float | None:
    if precision is None or baseline is None:
        return None
    return precision - baseline


def _trim_note(plan: SelectionPlan, curves) -> tuple[str, ...]:
    trimmed = trim_trailing_negatives(plan, curves)
    if trimmed.total == plan.total:
        return ()
    return (
        f"trailing entries past each group's last selected positive could be "
        f"dropped without changing recall: trimmed total would be {trimmed.total}",
    )


def build_tradeoff_menu(
    cohort: Cohort,
    attribute: str,
    k: int,
    reference_group: str | None = None,
    tie_break: str = BY_ENTITY_ID,
    seed: int | None = None,
) -> TradeoffMenu:
    """The five-option menu: unadjusted top-K, two expanded plans that
    chase the top-K recall profile, and two plans held at size K.

    Expansion targets come from the unadjusted audit itself: the
    equalized scenario raises every group to the best group recall at
    top-K, and the proportional scenario keeps the reference group at
    its own top-K recall while scaling the rest by prevalence.
    """
    if k < 0:
        raise ValidationError(f"k must be >= 0, got {k}")
    stats = stats_by_group(cohort, attribute)
    ref = reference_group if reference_group is not None else default_reference_group(stats)
    if ref not in stats:
        raise ValidationError(f"unknown reference group {ref!r}")

    curves = build_curves(cohort, attribute, tie_break, seed)
    base = audit_top_k(cohort, attribute, k, ref, tie_break, seed)

    recalls = {r.stats.group: r.metrics.recall for r in base.rows}
    observed = [v for v in recalls.values() if v is not None]
    eq_target = max(observed) if observed else 0.0
    ref_recall = recalls[ref]

    def balanced(spec: BalanceSpec, notes: tuple[str, ...]) -> tuple[SelectionPlan, AuditReport, tuple[str, ...]]:
        plan = run_balance(cohort, attribute, spec)
        ids = realize_selection(plan, cohort, attribute, tie_break, seed)
        return plan, audit_selection(cohort, attribute, ids, ref), notes

    def delta(audit: AuditReport) -> float | None:
        return _precision_delta(audit.overall_precision, base.overall_precision)

    scenarios = [
        TradeoffScenario(
            label=SCENARIO_TOP_K,
            plan=_unadjusted_plan(base, curves, k, tie_break, seed),
            audit=base,
            precision_delta_vs_unadjusted=delta(base),
        )
    ]

    plan, audit, notes = balanced(
        BalanceSpec(
            mode=MODE_EQUALIZED,
            constraint=Constraint(CONSTRAINT_RECALL_TARGET, eq_target),
            tie_break=tie_break,
            seed=seed,
        ),
        (f"expansion target is the best group recall in the top-{k} audit: {eq_target!r}",),
    )
    scenarios.append(
        TradeoffScenario(
            SCENARIO_EXPANDED_EQUALIZED, plan, audit, notes,
            precision_delta_vs_unadjusted=delta(audit),
        )
    )

    if ref_recall is None:
        raise ValidationError(
            f"reference group {ref!r} has no positives; proportional scenarios undefined"
        )
    plan, audit, notes = balanced(
        BalanceSpec(
            mode=MODE_PROPORTIONAL,
            constraint=Constraint(CONSTRAINT_REFERENCE_RECALL, ref_recall),
            reference_group=ref,
            tie_break=tie_break,
            seed=seed,
        ),
        (f"reference group {ref!r} keeps its top-{k} recall: {ref_recall!r}",),
    )
    scenarios.append(
        TradeoffScenario(
            SCENARIO_EXPANDED_PROPORTIONAL, plan, audit, notes,
            precision_delta_vs_unadjusted=delta(audit),
        )
    )

    plan, audit, notes = balanced(
        BalanceSpec(
            mode=MODE_EQUALIZED,
            constraint=Constraint(CONSTRAINT_LIST_SIZE, k),
            tie_break=tie_break,
            seed=seed,
        ),
        (),
    )
    scenarios.append(
        TradeoffScenario(
            SCENARIO_CURRENT_EQUALIZED, plan, audit, _trim_note(plan, curves),
            precision_delta_vs_unadjusted=delta(audit),
        )
    )

    plan, audit, notes = balanced(
        BalanceSpec(
            mode=MODE_PROPORTIONAL,
            constraint=Constraint(CONSTRAINT_LIST_SIZE, k),
            reference_group=ref,
            search_strategy=SEARCH_MERGED_PREFIX,
            tie_break=tie_break,
            seed=seed,
        ),
        (),
    )
    scenarios.append(
        TradeoffScenario(
            SCENARIO_CURRENT_PROPORTIONAL, plan, audit, _trim_note(plan, curves),
            precision_delta_vs_unadjusted=delta(audit),
        )
    )

    return TradeoffMenu(
        attribute=attribute,
        k=k,
        reference_group=ref,
        tie_break=tie_break,
        seed=seed,
        scenarios=tuple(scenarios),
    )


# ---------------------------------------------------------------------------
# Writers


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


_AUDIT_RATE_COLUMNS = (
    "recall", "precision", "fdr", "fpr", "fnr", "for",
    "fp_over_group_size", "fn_over_group_size",
)


def _audit_csv(report: AuditReport) -> str:
    header = ["group", "n", "positives", "selected", "tp", "fp", "fn", "tn"]
    header += list(_AUDIT_RATE_COLUMNS)
    header += [f"{name}_ratio" for name in _AUDIT_RATE_COLUMNS]
    rows = []
    for r in report.rows:
        m = r.metrics.as_dict()
        row = [
            r.stats.group, r.stats.n, r.stats.positives, r.metrics.selected,
            r.confusion.tp, r.confusion.fp, r.confusion.fn, r.confusion.tn,
        ]
        row += [m[name] for name in _AUDIT_RATE_COLUMNS]
        row += [r.ratios[name] for name in _AUDIT_RATE_COLUMNS]
        rows.append(row)
    return _write_csv(rows, header)


def _audit_plotdata(report: AuditReport) -> str:
    rows = []
    for r in report.rows:
        for name, value in r.metrics.as_dict().items():
            if name == "selected" or value is None:
                continue
            rows.append([r.stats.group, name, value])
    return _write_csv(rows, ["group", "metric", "value"])


def _plan_csv(plan: SelectionPlan) -> str:
    rows = [
        [q.group, q.k, q.target_recall, q.achieved_recall, q.r_g]
        for q in plan.quotas
    ]
    return _write_csv(rows, ["group", "k_g", "target_recall", "achieved_recall", "r_g"])


def _plan_plotdata(plan: SelectionPlan) -> str:
    rows = []
    for q in plan.quotas:
        rows.append([q.group, "count", q.k])
        rows.append([q.group, "recall", q.achieved_recall])
    return _write_csv(rows, ["group", "metric", "value"])


def _menu_csv(menu: TradeoffMenu) -> str:
    rows = [
        [s.label, s.total, s.overall_precision,
         s.precision_delta_vs_unadjusted, "; ".join(s.notes)]
        for s in menu.scenarios
    ]
    return _write_csv(
        rows,
        ["scenario", "total", "overall_precision",
         "precision_delta_vs_unadjusted", "notes"],
    )


def _menu_plotdata(menu: TradeoffMenu) -> str:
    rows = []
    for s in menu.scenarios:
        for r in s.audit.rows:
            if r.metrics.recall is not None:
                rows.append([s.label, r.stats.group, "recall", r.metrics.recall])
            rows.append([s.label, r.stats.group, "count", r.metrics.selected])
        rows.append([s.label, "overall", "total", s.total])
        if s.overall_precision is not None:
            rows.append([s.label, "overall", "precision", s.overall_precision])
        if s.precision_delta_vs_unadjusted is not None:
            rows.append(
                [s.label, "overall", "precision_delta",
                 s.precision_delta_vs_unadjusted]
            )
    return _write_csv(rows, ["scenario", "group", "metric", "value"])


def _evals_csv(result: TemporalEvalResult) -> str:
    rows = [
        [e.modeling_date.isoformat(), e.model_id, e.precision_at_k,
         e.n_evaluated, e.k_effective]
        for e in result.evaluations
    ]
    return _write_csv(
        rows,
        ["modeling_date", "model_id", "precision", "n_evaluated", "k_effective"],
    )


def _evals_plotdata(result: TemporalEvalResult) -> str:
    rows = [
        [e.modeling_date.isoformat(), e.model_id, e.precision_at_k]
        for e in result.evaluations
    ]
    return _write_csv(rows, ["modeling_date", "model_id", "precision"])


_CSV_WRITERS = {
    AuditReport: _audit_csv,
    SelectionPlan: _plan_csv,
    BalanceOutcome: lambda o: _plan_csv(o.plan),
    TradeoffMenu: _menu_csv,
    TemporalEvalResult: _evals_csv,
}

_PLOTDATA_WRITERS = {
    AuditReport: _audit_plotdata,
    SelectionPlan: _plan_plotdata,
    BalanceOutcome: lambda o: _plan_plotdata(o.plan),
    TradeoffMenu: _menu_plotdata,
    TemporalEvalResult: _evals_plotdata,
}

Emittable = Union[
    AuditReport, SelectionPlan, BalanceOutcome, TradeoffMenu, TemporalEvalResult
]


def render(obj: Emittable, format: str = FORMAT_JSON) -> bytes:
    """Serialize a report object to the requested format's bytes."""
    if format == FORMAT_JSON:
        return to_json_bytes(obj.to_payload())
    table = _CSV_WRITERS if format == FORMAT_CSV else _PLOTDATA_WRITERS
    if format not in (FORMAT_CSV, FORMAT_PLOTDATA):
        raise ValidationError(f"format must be one of {FORMATS}, got {format!r}")
    for cls, writer in table.items():
        if isinstance(obj, cls):
            return writer(obj).encode("utf-8")
    raise ValidationError(f"cannot emit {type(obj).__name__} as {format}")


def emit_report(
    obj: Emittable,
    dest: Union[str, Path, IO[bytes], None] = None,
    format: str = FORMAT_JSON,
) -> None:
    """Write a report to a path, a binary stream, or stdout."""
    data = render(obj, format)
    if dest is None:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()
    elif isinstance(dest, (str, Path)):
        Path(dest).write_bytes(data)
    else:
        dest.write(data)
