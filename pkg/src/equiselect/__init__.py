"""Fairness auditing and recall-balanced top-k selection for scored cohorts.

The package answers two questions about a risk-scored population that is
split into demographic groups: how unevenly does a plain top-K list reach
the people who actually have the outcome (auditing), and what per-group
list sizes would even that reach out under an explicit resource policy
(balancing). Around that core sit a tradeoff menu comparing candidate
policies at a glance, a decision tree recommending which disparity metric
to equalize for a given program, temporally blocked model evaluation, a
synthetic cohort generator, a CLI, and an HTTP API.

Everything below is re-exported from the submodules so callers can write
``from equiselect import audit_top_k`` without caring where it lives.
"""

from ._ordering import BY_ENTITY_ID, DEFAULT_SEED, SEEDED_RANDOM, TIE_BREAKS, global_order
from .balancer import (
    BalanceSpec,
    Constraint,
    CurveEntry,
    GroupQuota,
    MergedEntry,
    RollingRecallCurve,
    SelectionPlan,
    balance_equalized_by_recall,
    balance_equalized_by_size,
    balance_proportional_by_ref_recall,
    balance_proportional_by_size,
    build_curves,
    merge_curves,
    realize_selection,
    rolling_recall_curve,
    run_balance,
    trim_trailing_negatives,
)
from .cohort import (
    Cohort,
    IngestConfig,
    Provenance,
    ScoredExample,
    parse_score_file,
    partition_by_group,
    write_score_file,
)
from .errors import BalanceError, DataError, EquiselectError, ValidationError
from .fairness_tree import (
    FairnessContext,
    MetricRecommendation,
    recommend_metric,
    rule_table,
    valid_contexts,
)
from .metrics import (
    AuditReport,
    AuditRow,
    GroupConfusion,
    GroupMetricSet,
    GroupStats,
    audit_selection,
    audit_top_k,
    default_reference_group,
    stats_by_group,
)
from .reporting import (
    BalanceOutcome,
    TradeoffMenu,
    TradeoffScenario,
    build_tradeoff_menu,
    emit_report,
    render,
    run_balance_with_audit,
    to_json_bytes,
)
from .synth import GroupSpec, SynthSpec, generate_population
from .temporal import (
    SelectionRule,
    TemporalConfig,
    TemporalEvalResult,
    run_temporal_eval,
)

__all__ = [
    "BY_ENTITY_ID",
    "DEFAULT_SEED",
    "SEEDED_RANDOM",
    "TIE_BREAKS",
    "global_order",
    "BalanceSpec",
    "Constraint",
    "CurveEntry",
    "GroupQuota",
    "MergedEntry",
    "RollingRecallCurve",
    "SelectionPlan",
    "balance_equalized_by_recall",
    "balance_equalized_by_size",
    "balance_proportional_by_ref_recall",
    "balance_proportional_by_size",
    "build_curves",
    "merge_curves",
    "realize_selection",
    "rolling_recall_curve",
    "run_balance",
    "trim_trailing_negatives",
    "Cohort",
    "IngestConfig",
    "Provenance",
    "ScoredExample",
    "parse_score_file",
    "partition_by_group",
    "write_score_file",
    "BalanceError",
    "DataError",
    "EquiselectError",
    "ValidationError",
    "FairnessContext",
    "MetricRecommendation",
    "recommend_metric",
    "rule_table",
    "valid_contexts",
    "AuditReport",
    "AuditRow",
    "GroupConfusion",
    "GroupMetricSet",
    "GroupStats",
    "audit_selection",
    "audit_top_k",
    "default_reference_group",
    "stats_by_group",
    "BalanceOutcome",
    "TradeoffMenu",
    "TradeoffScenario",
    "build_tradeoff_menu",
    "emit_report",
    "render",
    "run_balance_with_audit",
    "to_json_bytes",
    "GroupSpec",
    "SynthSpec",
    "generate_population",
    "SelectionRule",
    "TemporalConfig",
    "TemporalEvalResult",
    "run_temporal_eval",
]
