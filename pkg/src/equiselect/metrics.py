"""Per-group confusion counts, the derived rate family, and audits.

Rates with a zero denominator are absent (None), never 0 or NaN, so a
degenerate group can never silently pass a parity comparison.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ._ordering import BY_ENTITY_ID, global_order
from .cohort import Cohort, ScoredExample
from .errors import ValidationError

RATE_NAMES = (
    "recall",
    "precision",
    "fdr",
    "fpr",
    "fnr",
    "for",
    "fp_over_group_size",
    "fn_over_group_size",
)

__all__ = [
    "GroupStats",
    "GroupConfusion",
    "GroupMetricSet",
    "AuditRow",
    "AuditReport",
    "group_stats",
    "stats_by_group",
    "confusion_at_selection",
    "metrics_from_confusion",
    "audit_selection",
    "audit_top_k",
]


def _rate(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


@dataclass(frozen=True, slots=True)
class GroupStats:
    group: str
    n: int
    positives: int

    @property
    def prevalence(self) -> float:
        return self.positives / self.n if self.n > 0 else 0.0


@dataclass(frozen=True, slots=True)
class GroupConfusion:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValidationError("confusion counts must be non-negative")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def selected(self) -> int:
        return self.tp + self.fp


@dataclass(frozen=True, slots=True)
class GroupMetricSet:
    recall: float | None
    precision: float | None
    fdr: float | None
    fpr: float | None
    fnr: float | None
    for_: float | None
    fp_over_group_size: float | None
    fn_over_group_size: float | None
    selected: int

    def as_dict(self) -> dict[str, float | int | None]:
        return {
            "recall": self.recall,
            "precision": self.precision,
            "fdr": self.fdr,
            "fpr": self.fpr,
            "fnr": self.fnr,
            "for": self.for_,
            "fp_over_group_size": self.fp_over_group_size,
            "fn_over_group_size": self.fn_over_group_size,
            "selected": self.selected,
        }


def metrics_from_confusion(c: GroupConfusion) -> GroupMetricSet:
    return GroupMetricSet(
        recall=_rate(c.tp, c.tp + c.fn),
        precision=_rate(c.tp, c.tp + c.fp),
        fdr=_rate(c.fp, c.tp + c.fp),
        fpr=_rate(c.fp, c.fp + c.tn),
        fnr=_rate(c.fn, c.tp + c.fn),
        for_=_rate(c.fn, c.fn + c.tn),
        fp_over_group_size=_rate(c.fp, c.n),
        fn_over_group_size=_rate(c.fn, c.n),
        selected=c.selected,
    )


def group_stats(
    partitions: Mapping[str, Sequence[ScoredExample]]
) -> list[GroupStats]:
    """One GroupStats per category, sorted by category name."""
    out = []
    for cat in sorted(partitions):
        rows = partitions[cat]
        out.append(
            GroupStats(
                group=cat,
                n=len(rows),
                positives=sum(ex.label for ex in rows),
            )
        )
    return out


def stats_by_group(cohort: Cohort, attribute: str) -> dict[str, GroupStats]:
    """Fast path over the cohort's column cache."""
    if attribute not in cohort.attributes:
        raise ValidationError(f"unknown attribute {attribute!r}")
    cols = cohort._columns
    codes, cats = cols["attrs"][attribute]
    n_per = np.bincount(codes, minlength=len(cats))
    pos_per = np.bincount(
        codes[cols["labels"] == 1], minlength=len(cats)
    )
    return {
        cat: GroupStats(group=cat, n=int(n_per[i]), positives=int(pos_per[i]))
        for i, cat in enumerate(cats)
    }


def confusion_at_selection(
    examples: Sequence[ScoredExample], selected_ids: Iterable[str]
) -> GroupConfusion:
    """Counts for one group given the entity ids chosen from it."""
    selected = set(selected_ids)
    known = {ex.entity_id for ex in examples}
    stray = selected - known
    if stray:
        raise ValidationError(
            f"selected ids not in group: {sorted(stray)[:5]}"
        )
    tp = fp = fn = tn = 0
    for ex in examples:
        if ex.entity_id in selected:
            if ex.label == 1:
                tp += 1
            else:
                fp += 1
        elif ex.label == 1:
            fn += 1
        else:
            tn += 1
    return GroupConfusion(tp=tp, fp=fp, fn=fn, tn=tn)


@dataclass(frozen=True, slots=True)
class AuditRow:
    stats: GroupStats
    confusion: GroupConfusion
    metrics: GroupMetricSet
    ratios: dict[str, float | None]


@dataclass(frozen=True)
class AuditReport:
    attribute: str
    k: int
    reference_group: str
    rows: tuple[AuditRow, ...]
    overall_precision: float | None

    def row(self, group: str) -> AuditRow:
        for r in self.rows:
            if r.stats.group == group:
                return r
        raise KeyError(group)

    def to_payload(self) -> dict:
        return {
            "attribute": self.attribute,
            "k": self.k,
            "reference_group": self.reference_group,
            "groups": [
                {
                    "group": r.stats.group,
                    "n": r.stats.n,
                    "positives": r.stats.positives,
                    "prevalence": r.stats.prevalence,
                    "tp": r.confusion.tp,
                    "fp": r.confusion.fp,
                    "fn": r.confusion.fn,
                    "tn": r.confusion.tn,
                    "metrics": r.metrics.as_dict(),
                    "ratios": dict(r.ratios),
                }
                for r in self.rows
            ],
            "overall_precision": self.overall_precision,
        }


def default_reference_group(stats: Mapping[str, GroupStats]) -> str:
    """Largest group by size; name ascending breaks ties."""
    return min(stats.values(), key=lambda s: (-s.n, s.group)).group


def _ratios_against(
    metrics: GroupMetricSet, ref: GroupMetricSet, is_reference: bool
) -> dict[str, float | None]:
    out: dict[str, float | None] = {}
    mine = metrics.as_dict()
    theirs = ref.as_dict()
    for name in RATE_NAMES:
        value, base = mine[name], theirs[name]
        if value is None or base is None:
            out[name] = None
        elif is_reference:
            out[name] = 1.0
        elif base == 0:
            out[name] = None
        else:
            out[name] = value / base
    return out


def _audit_from_positions(
    cohort: Cohort,
    attribute: str,
    positions: np.ndarray,
    k: int,
    reference_group: str | None,
) -> AuditReport:
    cols = cohort._columns
    labels = cols["labels"]
    codes, cats = cols["attrs"][attribute]
    n_groups = len(cats)
    mask = np.zeros(len(labels), dtype=bool)
    mask[positions] = True
    pos_lab = labels == 1
    tp = np.bincount(codes[mask & pos_lab], minlength=n_groups)
    fp = np.bincount(codes[mask & ~pos_lab], minlength=n_groups)
    n_per = np.bincount(codes, minlength=n_groups)
    y_per = np.bincount(codes[pos_lab], minlength=n_groups)
    stats = {
        cat: GroupStats(group=cat, n=int(n_per[i]), positives=int(y_per[i]))
        for i, cat in enumerate(cats)
    }
    reference = reference_group or default_reference_group(stats)
    if reference not in stats:
        raise ValidationError(
            f"reference group {reference!r} not present for {attribute!r}"
        )
    confusion: dict[str, GroupConfusion] = {}
    metric_sets: dict[str, GroupMetricSet] = {}
    for i, cat in enumerate(cats):
        c = GroupConfusion(
            tp=int(tp[i]),
            fp=int(fp[i]),
            fn=int(y_per[i] - tp[i]),
            tn=int(n_per[i] - y_per[i] - fp[i]),
        )
        confusion[cat] = c
        metric_sets[cat] = metrics_from_confusion(c)
    rows = tuple(
        AuditRow(
            stats=stats[cat],
            confusion=confusion[cat],
            metrics=metric_sets[cat],
            ratios=_ratios_against(
                metric_sets[cat], metric_sets[reference], cat == reference
            ),
        )
        for cat in cats
    )
    overall = _rate(int(labels[positions].sum()), int(len(positions)))
    return AuditReport(
        attribute=attribute,
        k=k,
        reference_group=reference,
        rows=rows,
        overall_precision=overall,
    )


def audit_selection(
    cohort: Cohort,
    attribute: str,
    selected_ids: Iterable[str],
    reference_group: str | None = None,
) -> AuditReport:
    """Audit an explicit selection given by entity ids.

    Requires one row per entity in the cohort so ids identify rows
    unambiguously.
    """
    if attribute not in cohort.attributes:
        raise ValidationError(f"unknown attribute {attribute!r}")
    cols = cohort._columns
    ids = cols["ids"]
    index: dict[str, int] = {}
    for i, eid in enumerate(ids):
        if eid in index:
            raise ValidationError(
                "audit_selection requires unique entity ids; "
                f"{eid!r} appears more than once"
            )
        index[eid] = i
    positions = []
    for eid in selected_ids:
        if eid not in index:
            raise ValidationError(f"selected id {eid!r} not in cohort")
        positions.append(index[eid])
    if len(set(positions)) != len(positions):
        raise ValidationError("selected ids contain duplicates")
    return _audit_from_positions(
        cohort, attribute, np.asarray(positions, dtype=np.int64),
        len(positions), reference_group,
    )


def audit_top_k(
    cohort: Cohort,
    attribute: str,
    k: int,
    reference_group: str | None = None,
    tie_break: str = BY_ENTITY_ID,
    seed: int | None = None,
) -> AuditReport:
    """Audit the k highest-scoring examples cohort-wide."""
    if attribute not in cohort.attributes:
        raise ValidationError(f"unknown attribute {attribute!r}")
    if k < 0:
        raise ValidationError(f"k must be >= 0, got {k}")
    if k > len(cohort):
        raise ValidationError(
            f"k={k} exceeds cohort size {len(cohort)}"
        )
    order = global_order(cohort, tie_break, seed)
    return _audit_from_positions(
        cohort, attribute, order[:k], k, reference_group
    )
