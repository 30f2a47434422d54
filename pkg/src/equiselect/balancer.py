"""Recall-balancing quota computation over scored groups.

Given per-group rolling recall curves, the balance operations compute
group quotas k_g that either equalize recall across groups or target
recalls proportional to group prevalence, constrained by a recall
target or a total list size. Quota boundaries are decided with exact
integer arithmetic (a rolling recall is the rational cum_positives/Y_g),
so results never depend on floating-point rounding at a breakpoint.

Semantics worth knowing before use:

* Quotas are formula-literal by default: the largest n whose rolling
  recall is at or below the target. Leading and trailing negatives on a
  recall plateau are included. ``trim_trailing_negatives`` is the
  opt-in post-pass that shrinks each quota to the shortest prefix with
  the same recall (totals may then drop below a size budget; freed
  slots are not backfilled).
* Groups with no observed positives have rolling recall defined as 0
  everywhere. Recall targets are meaningless for them, so every
  recall-targeted mode forces their quota to 0 and records a warning.
  The size-constrained equalized mode merges their entries literally.
* The proportional size search can overshoot the budget; the plan
  reports both the budget and the achieved total. The exact breakpoint
  strategy also records the last undershooting quotas so callers can
  pick either side. ``proportional_prefix_by_size`` is the refinement
  that lands on the budget exactly.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from ._ordering import BY_ENTITY_ID, SEEDED_RANDOM, global_order, validate_tie_break
from .cohort import Cohort, ScoredExample
from .errors import BalanceError, ValidationError
from .metrics import GroupStats

MODE_EQUALIZED = "equalized"
MODE_PROPORTIONAL = "proportional"
MODE_UNADJUSTED = "unadjusted"

CONSTRAINT_LIST_SIZE = "list_size"
CONSTRAINT_RECALL_TARGET = "recall_target"
CONSTRAINT_REFERENCE_RECALL = "reference_recall"

SEARCH_FIXED_STEP = "fixed_step"
SEARCH_EXACT_BREAKPOINT = "exact_breakpoint"
SEARCH_MERGED_PREFIX = "merged_prefix"

DEFAULT_STEP_SIZE = 1e-4

__all__ = [
    "CurveEntry",
    "RollingRecallCurve",
    "MergedEntry",
    "Constraint",
    "BalanceSpec",
    "ProportionalSearchState",
    "GroupQuota",
    "SelectionPlan",
    "rolling_recall_curve",
    "build_curves",
    "merge_curves",
    "balance_equalized_by_recall",
    "balance_equalized_by_size",
    "balance_proportional_by_ref_recall",
    "balance_proportional_by_size",
    "proportional_prefix_by_size",
    "trim_trailing_negatives",
    "realize_selection",
    "run_balance",
]


@dataclass(frozen=True, slots=True)
class CurveEntry:
    n: int
    cum_positives: int
    rolling_recall: float


@dataclass(frozen=True, eq=False)
class RollingRecallCurve:
    """Within-group cumulative recall by selection depth.

    ``cum_positives[i]`` counts positives among the group's top i+1
    members under the score-descending order with the recorded tie
    rule. ``rolling_recall`` is that count over Y_g, or all zeros for a
    group with no positives.
    """

    group: str
    stats: GroupStats
    cum_positives: np.ndarray
    ordered_entity_ids: tuple[str, ...]
    tie_break: str = BY_ENTITY_ID
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.stats.n == 0:
            raise ValidationError(f"group {self.group!r} is empty")
        if len(self.cum_positives) != self.stats.n:
            raise ValidationError("curve length must equal group size")
        if np.any(np.diff(self.cum_positives) < 0):
            raise AssertionError("cum_positives must be non-decreasing")

    @cached_property
    def rolling_recall(self) -> np.ndarray:
        y = self.stats.positives
        if y == 0:
            return np.zeros(self.stats.n, dtype=np.float64)
        return self.cum_positives / float(y)

    @cached_property
    def entries(self) -> tuple[CurveEntry, ...]:
        rr = self.rolling_recall
        return tuple(
            CurveEntry(
                n=i + 1,
                cum_positives=int(self.cum_positives[i]),
                rolling_recall=float(rr[i]),
            )
            for i in range(self.stats.n)
        )

    def recall_at(self, k: int) -> float:
        """Rolling recall of the k-prefix; 0.0 for the empty prefix."""
        if k <= 0 or self.stats.positives == 0:
            return 0.0
        return float(self.cum_positives[k - 1]) / self.stats.positives

    def recall_fraction_at(self, k: int) -> Fraction:
        if k <= 0 or self.stats.positives == 0:
            return Fraction(0)
        return Fraction(int(self.cum_positives[k - 1]), self.stats.positives)


@dataclass(frozen=True, slots=True)
class MergedEntry:
    group: str
    n: int
    rolling_recall: float
    m: int


@dataclass(frozen=True, slots=True)
class Constraint:
    kind: str
    value: float

    def __post_init__(self) -> None:
        if self.kind not in (
            CONSTRAINT_LIST_SIZE,
            CONSTRAINT_RECALL_TARGET,
            CONSTRAINT_REFERENCE_RECALL,
        ):
            raise ValidationError(f"unknown constraint kind {self.kind!r}")
        if self.kind == CONSTRAINT_LIST_SIZE:
            if self.value != int(self.value) or self.value < 0:
                raise ValidationError(
                    f"list_size must be a non-negative integer, got {self.value!r}"
                )
        elif not 0 <= self.value <= 1:
            raise ValidationError(
                f"{self.kind} must lie in [0, 1], got {self.value!r}"
            )

    def to_payload(self) -> dict:
        value = int(self.value) if self.kind == CONSTRAINT_LIST_SIZE else self.value
        return {"kind": self.kind, "value": value}


@dataclass(frozen=True)
class BalanceSpec:
    """Full description of one balancing request."""

    mode: str
    constraint: Constraint
    reference_group: str | None = None
    step_size: float = DEFAULT_STEP_SIZE
    search_strategy: str = SEARCH_FIXED_STEP
    tie_break: str = BY_ENTITY_ID
    seed: int | None = None
    trim: bool = False

    def __post_init__(self) -> None:
        if self.mode not in (MODE_EQUALIZED, MODE_PROPORTIONAL):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.mode == MODE_PROPORTIONAL and not self.reference_group:
            raise ValidationError("proportional mode requires a reference_group")
        if self.mode == MODE_EQUALIZED and self.reference_group:
            raise ValidationError("equalized mode takes no reference_group")
        if self.mode == MODE_EQUALIZED and self.constraint.kind == CONSTRAINT_REFERENCE_RECALL:
            raise ValidationError(
                "equalized mode uses a recall_target, not a reference_recall"
            )
        if self.mode == MODE_PROPORTIONAL and self.constraint.kind == CONSTRAINT_RECALL_TARGET:
            raise ValidationError(
                "proportional mode uses a reference_recall, not a recall_target"
            )
        if self.search_strategy not in (
            SEARCH_FIXED_STEP,
            SEARCH_EXACT_BREAKPOINT,
            SEARCH_MERGED_PREFIX,
        ):
            raise ValidationError(
                f"unknown search_strategy {self.search_strategy!r}"
            )
        if self.step_size <= 0:
            raise ValidationError("step_size must be positive")
        validate_tie_break(self.tie_break, self.seed)

    @classmethod
    def from_payload(cls, raw: Mapping) -> "BalanceSpec":
        """Build a spec from a JSON-shaped mapping. The constraint may be
        given as {"kind", "value"} or via the shorthand keys k / recall /
        ref_recall; options may be nested under "options" or flat."""
        if not isinstance(raw, Mapping):
            raise ValidationError("balance request must be a JSON object")
        data = dict(raw)
        options = data.pop("options", {}) or {}
        if not isinstance(options, Mapping):
            raise ValidationError("options must be a JSON object")
        merged = {**data, **options}
        mode = merged.pop("mode", None)
        if mode is None:
            raise ValidationError("balance request requires a mode")
        constraint = merged.pop("constraint", None)
        shorthand = [
            (key, kind)
            for key, kind in (
                ("k", CONSTRAINT_LIST_SIZE),
                ("recall", CONSTRAINT_RECALL_TARGET),
                ("ref_recall", CONSTRAINT_REFERENCE_RECALL),
            )
            if key in merged
        ]
        if constraint is not None and shorthand:
            raise ValidationError("give either a constraint object or a shorthand key")
        if constraint is not None:
            if not isinstance(constraint, Mapping) or set(constraint) - {"kind", "value"}:
                raise ValidationError('constraint must be {"kind", "value"}')
            try:
                parsed = Constraint(
                    kind=constraint["kind"], value=float(constraint["value"])
                )
            except (KeyError, TypeError) as exc:
                raise ValidationError(f"invalid constraint: {exc}") from exc
        elif len(shorthand) == 1:
            key, kind = shorthand[0]
            try:
                parsed = Constraint(kind=kind, value=float(merged.pop(key)))
            except TypeError as exc:
                raise ValidationError(f"invalid {key}: {exc}") from exc
        else:
            raise ValidationError(
                "exactly one constraint is required (k, recall, or ref_recall)"
            )
        known = {
            "reference_group", "step_size", "search_strategy",
            "tie_break", "seed", "trim",
        }
        unknown = set(merged) - known - {"k", "recall", "ref_recall"}
        if unknown:
            raise ValidationError(f"unknown balance keys: {sorted(unknown)}")
        kwargs = {k: merged[k] for k in known if merged.get(k) is not None}
        if "step_size" in kwargs:
            kwargs["step_size"] = float(kwargs["step_size"])
        if "seed" in kwargs:
            kwargs["seed"] = int(kwargs["seed"])
        if "trim" in kwargs:
            kwargs["trim"] = bool(kwargs["trim"])
        return cls(mode=mode, constraint=parsed, **kwargs)


@dataclass(frozen=True, slots=True)
class ProportionalSearchState:
    x: float
    k_all: int


@dataclass(frozen=True, slots=True)
class GroupQuota:
    group: str
    k: int
    target_recall: float | None
    achieved_recall: float
    r_g: float | None = None


@dataclass(frozen=True, eq=False)
class SelectionPlan:
    mode: str
    constraint: Constraint
    quotas: tuple[GroupQuota, ...]
    reference_group: str | None = None
    step_size: float | None = None
    search_strategy: str | None = None
    tie_break: str = BY_ENTITY_ID
    seed: int | None = None
    requested_k: int | None = None
    warnings: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)
    selected_ids: tuple[str, ...] | None = None

    @property
    def total(self) -> int:
        return sum(q.k for q in self.quotas)

    def quota(self, group: str) -> GroupQuota:
        for q in self.quotas:
            if q.group == group:
                return q
        raise KeyError(group)

    @property
    def quota_map(self) -> dict[str, int]:
        return {q.group: q.k for q in self.quotas}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SelectionPlan):
            return NotImplemented
        return self.to_payload() == other.to_payload()

    def to_payload(self) -> dict:
        return {
            "mode": self.mode,
            "constraint": self.constraint.to_payload(),
            "reference_group": self.reference_group,
            "step_size": self.step_size,
            "search_strategy": self.search_strategy,
            "tie_break": self.tie_break,
            "seed": self.seed,
            "groups": [
                {
                    "group": q.group,
                    "k_g": q.k,
                    "target_recall": q.target_recall,
                    "achieved_recall": q.achieved_recall,
                    "r_g": q.r_g,
                }
                for q in self.quotas
            ],
            "total": self.total,
            "requested_K": self.requested_k,
            "warnings": list(self.warnings),
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# Curve construction


def _sort_key_for(tie_break: str, seed: int | None):
    if tie_break == BY_ENTITY_ID:
        return lambda ex: (-ex.score, ex.key)

    def seeded(ex: ScoredExample):
        digest = hashlib.blake2b(
            f"{seed}|".encode() + "|".join(ex.key).encode(), digest_size=8
        ).digest()
        return (-ex.score, digest, ex.key)

    return seeded


def rolling_recall_curve(
    examples: Sequence[ScoredExample],
    tie_break: str = BY_ENTITY_ID,
    seed: int | None = None,
    group: str | None = None,
) -> RollingRecallCurve:
    """Sort one group's examples by score descending and accumulate
    positives into the rolling recall sequence."""
    seed = validate_tie_break(tie_break, seed)
    if not examples:
        raise ValidationError("cannot build a curve for an empty group")
    ordered = sorted(examples, key=_sort_key_for(tie_break, seed))
    labels = np.fromiter((ex.label for ex in ordered), dtype=np.int64,
                         count=len(ordered))
    cum = np.cumsum(labels)
    name = group if group is not None else _infer_group(examples)
    stats = GroupStats(group=name, n=len(ordered), positives=int(cum[-1]))
    return RollingRecallCurve(
        group=name,
        stats=stats,
        cum_positives=cum,
        ordered_entity_ids=tuple(ex.entity_id for ex in ordered),
        tie_break=tie_break,
        seed=seed,
    )


def _infer_group(examples: Sequence[ScoredExample]) -> str:
    values = {v for ex in examples for v in ex.group_values.values()}
    return values.pop() if len(values) == 1 else ""


def build_curves(
    cohort: Cohort,
    attribute: str,
    tie_break: str = BY_ENTITY_ID,
    seed: int | None = None,
) -> dict[str, RollingRecallCurve]:
    """All per-group curves for one attribute, sharing a single global
    sort (a group's members keep their global relative order)."""
    if attribute not in cohort.attributes:
        raise ValidationError(f"unknown attribute {attribute!r}")
    seed = validate_tie_break(tie_break, seed)
    cols = cohort._columns
    codes, cats = cols["attrs"][attribute]
    order = global_order(cohort, tie_break, seed)
    codes_ordered = codes[order]
    labels_ordered = cols["labels"][order]
    ids = cols["ids"]
    curves: dict[str, RollingRecallCurve] = {}
    for gi, cat in enumerate(cats):
        member_positions = order[codes_ordered == gi]
        labels_g = labels_ordered[codes_ordered == gi]
        cum = np.cumsum(labels_g)
        stats = GroupStats(
            group=cat, n=int(len(labels_g)), positives=int(cum[-1])
        )
        curves[cat] = RollingRecallCurve(
            group=cat,
            stats=stats,
            cum_positives=cum,
            ordered_entity_ids=tuple(ids[j] for j in member_positions),
            tie_break=tie_break,
            seed=seed,
        )
    return curves


# ---------------------------------------------------------------------------
# Shared quota arithmetic


def _max_n_at_target(curve: RollingRecallCurve, target: Fraction) -> int:
    """Largest n with rolling recall <= target, by exact arithmetic.

    cum_positives/Y <= target iff cum_positives <= floor(target * Y),
    and cum_positives is non-decreasing, so the answer is a prefix
    length found by binary search.
    """
    y = curve.stats.positives
    if target < 0:
        return 0
    if y == 0:
        return curve.stats.n
    threshold = (target.numerator * y) // target.denominator
    if threshold >= y:
        return curve.stats.n
    return int(np.searchsorted(curve.cum_positives, threshold, side="right"))


def _split_zero_positive(
    curves: Mapping[str, RollingRecallCurve]
) -> tuple[list[str], list[str]]:
    active, zero = [], []
    for cat in sorted(curves):
        (active if curves[cat].stats.positives > 0 else zero).append(cat)
    return active, zero


def _zero_positive_warnings(zero: Sequence[str]) -> tuple[str, ...]:
    return tuple(
        f"group {cat!r} has no observed positives; quota forced to 0"
        for cat in zero
    )


def _check_curves(curves: Mapping[str, RollingRecallCurve]) -> tuple[str, int | None]:
    if not curves:
        raise ValidationError("no curves given")
    settings = {(c.tie_break, c.seed) for c in curves.values()}
    if len(settings) > 1:
        raise ValidationError("curves were built with mixed tie rules")
    return settings.pop()


def _ratios(
    curves: Mapping[str, RollingRecallCurve], reference_group: str
) -> dict[str, Fraction]:
    if reference_group not in curves:
        raise ValidationError(
            f"reference group {reference_group!r} not among curves"
        )
    ref = curves[reference_group].stats
    if ref.positives == 0:
        raise BalanceError(
            f"reference group {reference_group!r} has zero prevalence; "
            "proportional targets are undefined"
        )
    out = {}
    for cat, curve in curves.items():
        s = curve.stats
        out[cat] = Fraction(s.positives * ref.n, s.n * ref.positives)
    return out


def _group_tie_ranks(
    curves: Mapping[str, RollingRecallCurve],
    group_tie_order: Sequence[str] | None,
) -> dict[str, int]:
    """Cross-group tie priority: positives descending, then name."""
    if group_tie_order is not None:
        if set(group_tie_order) != set(curves):
            raise ValidationError(
                "group_tie_order must list every group exactly once"
            )
        return {cat: i for i, cat in enumerate(group_tie_order)}
    ordered = sorted(
        curves, key=lambda cat: (-curves[cat].stats.positives, cat)
    )
    return {cat: i for i, cat in enumerate(ordered)}


# ---------------------------------------------------------------------------
# Balance operations


def balance_equalized_by_recall(
    curves: Mapping[str, RollingRecallCurve], target_recall: float
) -> SelectionPlan:
    """Quota per group: the deepest prefix whose rolling recall stays at
    or below the shared target."""
    if not 0 <= target_recall <= 1:
        raise ValidationError(
            f"recall target must lie in [0, 1], got {target_recall!r}"
        )
    tie_break, seed = _check_curves(curves)
    active, zero = _split_zero_positive(curves)
    target = Fraction(target_recall)
    quotas = []
    for cat in sorted(curves):
        curve = curves[cat]
        k = _max_n_at_target(curve, target) if cat in active else 0
        quotas.append(
            GroupQuota(
                group=cat,
                k=k,
                target_recall=float(target_recall),
                achieved_recall=curve.recall_at(k),
            )
        )
    return SelectionPlan(
        mode=MODE_EQUALIZED,
        constraint=Constraint(CONSTRAINT_RECALL_TARGET, float(target_recall)),
        quotas=tuple(quotas),
        tie_break=tie_break,
        seed=seed,
        warnings=_zero_positive_warnings(zero),
    )


def merge_curves(
    curves: Mapping[str, RollingRecallCurve],
    group_tie_order: Sequence[str] | None = None,
) -> list[MergedEntry]:
    """Entries of all curves in merged order (rolling recall, then depth,
    then the cross-group tie rank)."""
    _check_curves(curves)
    ranks = _group_tie_ranks(curves, group_tie_order)
    keyed = []
    for cat, curve in curves.items():
        y = curve.stats.positives
        for i in range(curve.stats.n):
            rr = Fraction(int(curve.cum_positives[i]), y) if y else Fraction(0)
            keyed.append((rr, i + 1, ranks[cat], cat))
    keyed.sort()
    return [
        MergedEntry(group=cat, n=n, rolling_recall=float(rr), m=m)
        for m, (rr, n, _, cat) in enumerate(keyed, start=1)
    ]


def balance_equalized_by_size(
    curves: Mapping[str, RollingRecallCurve],
    size: int,
    group_tie_order: Sequence[str] | None = None,
) -> SelectionPlan:
    """Take the first `size` entries of the merged curve order; each
    group's quota is its deepest entry inside that prefix, so the total
    equals `size` exactly."""
    tie_break, seed = _check_curves(curves)
    total_n = sum(c.stats.n for c in curves.values())
    if not 0 <= size <= total_n:
        raise ValidationError(
            f"size must lie in [0, {total_n}], got {size}"
        )
    ranks = _group_tie_ranks(curves, group_tie_order)
    cats = sorted(curves)
    rr_parts, n_parts, tie_parts, code_parts = [], [], [], []
    for ci, cat in enumerate(cats):
        curve = curves[cat]
        rr_parts.append(curve.rolling_recall)
        n_parts.append(np.arange(1, curve.stats.n + 1, dtype=np.int64))
        tie_parts.append(
            np.full(curve.stats.n, ranks[cat], dtype=np.int64)
        )
        code_parts.append(np.full(curve.stats.n, ci, dtype=np.int64))
    rr_all = np.concatenate(rr_parts)
    n_all = np.concatenate(n_parts)
    tie_all = np.concatenate(tie_parts)
    code_all = np.concatenate(code_parts)
    merged = np.lexsort((tie_all, n_all, rr_all))
    prefix = merged[:size]
    counts = np.bincount(code_all[prefix], minlength=len(cats))
    quotas = []
    for ci, cat in enumerate(cats):
        k = int(counts[ci])
        quotas.append(
            GroupQuota(
                group=cat,
                k=k,
                target_recall=None,
                achieved_recall=curves[cat].recall_at(k),
            )
        )
    diagnostics = {}
    if size > 0:
        last = merged[size - 1]
        diagnostics["frontier_rolling_recall"] = float(rr_all[last])
    return SelectionPlan(
        mode=MODE_EQUALIZED,
        constraint=Constraint(CONSTRAINT_LIST_SIZE, size),
        quotas=tuple(quotas),
        tie_break=tie_break,
        seed=seed,
        requested_k=size,
        diagnostics=diagnostics,
    )


def balance_proportional_by_ref_recall(
    curves: Mapping[str, RollingRecallCurve],
    reference_group: str,
    reference_recall: float,
) -> SelectionPlan:
    """Per-group target: the reference recall scaled by the prevalence
    ratio r_g = P_g / P_ref, capped at 1."""
    if not 0 <= reference_recall <= 1:
        raise ValidationError(
            f"reference recall must lie in [0, 1], got {reference_recall!r}"
        )
    tie_break, seed = _check_curves(curves)
    ratios = _ratios(curves, reference_group)
    active, zero = _split_zero_positive(curves)
    ref_target = Fraction(reference_recall)
    quotas = []
    capped = []
    for cat in sorted(curves):
        curve = curves[cat]
        raw_target = ratios[cat] * ref_target
        target = min(Fraction(1), raw_target)
        if raw_target > 1:
            capped.append(cat)
        k = _max_n_at_target(curve, target) if cat in active else 0
        quotas.append(
            GroupQuota(
                group=cat,
                k=k,
                target_recall=float(target),
                achieved_recall=curve.recall_at(k),
                r_g=float(ratios[cat]),
            )
        )
    diagnostics = {}
    if capped:
        diagnostics["targets_capped_at_1"] = capped
    return SelectionPlan(
        mode=MODE_PROPORTIONAL,
        constraint=Constraint(CONSTRAINT_REFERENCE_RECALL, float(reference_recall)),
        quotas=tuple(quotas),
        reference_group=reference_group,
        tie_break=tie_break,
        seed=seed,
        warnings=_zero_positive_warnings(zero),
        diagnostics=diagnostics,
    )


def _proportional_quotas_at(
    curves: Mapping[str, RollingRecallCurve],
    ratios: Mapping[str, Fraction],
    active: Sequence[str],
    x: Fraction,
) -> dict[str, int]:
    out: dict[str, int] = {}
    for cat in curves:
        if cat not in active:
            out[cat] = 0
            continue
        target = min(Fraction(1), ratios[cat] * x)
        out[cat] = _max_n_at_target(curves[cat], target)
    return out


def _assert_monotone_path(probes: list[tuple[Fraction, int]]) -> None:
    ordered = sorted(probes)
    totals = [k for _, k in ordered]
    if any(b < a for a, b in zip(totals, totals[1:])):
        raise AssertionError("k_all must be non-decreasing along the search")


def balance_proportional_by_size(
    curves: Mapping[str, RollingRecallCurve],
    reference_group: str,
    size: int,
    step_size: float = DEFAULT_STEP_SIZE,
    search_strategy: str = SEARCH_FIXED_STEP,
) -> SelectionPlan:
    """Raise the reference recall target x until proportional quotas
    reach the budget.

    fixed_step walks x from the reference curve's minimum rolling recall
    in exact increments of step_size; because the total is non-decreasing
    in x, the first qualifying step is found by bisection over the step
    count, which returns exactly what the literal walk would. The plan
    may overshoot the budget; diagnostics report the achieved total and
    the search path. exact_breakpoint instead searches the finite set of
    x values where any quota can change, returning the smallest
    qualifying x (never above the fixed_step result for the same data)
    plus the last undershooting quotas.
    """
    tie_break, seed = _check_curves(curves)
    if search_strategy not in (SEARCH_FIXED_STEP, SEARCH_EXACT_BREAKPOINT):
        raise ValidationError(
            f"unknown search_strategy {search_strategy!r}"
        )
    total_n = sum(c.stats.n for c in curves.values())
    if size < 0:
        raise ValidationError(f"size must be non-negative, got {size}")
    if size > total_n:
        raise ValidationError(f"size {size} exceeds population {total_n}")
    ratios = _ratios(curves, reference_group)
    active, zero = _split_zero_positive(curves)
    warnings = list(_zero_positive_warnings(zero))
    reachable = sum(curves[cat].stats.n for cat in active)
    if size > reachable:
        raise BalanceError(
            f"budget {size} is unreachable: only {reachable} members belong "
            "to groups with observed positives"
        )

    base = dict(
        mode=MODE_PROPORTIONAL,
        constraint=Constraint(CONSTRAINT_LIST_SIZE, size),
        reference_group=reference_group,
        tie_break=tie_break,
        seed=seed,
        requested_k=size,
    )

    if size <= 0:
        # Degenerate budget: the loop's exit condition holds before any
        # selection is wanted, so the plan is all zeros.
        quotas = tuple(
            GroupQuota(group=cat, k=0, target_recall=None,
                       achieved_recall=0.0, r_g=float(ratios[cat]))
            for cat in sorted(curves)
        )
        return SelectionPlan(
            quotas=quotas,
            search_strategy=search_strategy,
            step_size=step_size if search_strategy == SEARCH_FIXED_STEP else None,
            warnings=tuple(warnings),
            diagnostics={"k_all": 0},
            **base,
        )

    ref_curve = curves[reference_group]
    x_init = Fraction(int(ref_curve.cum_positives[0]), ref_curve.stats.positives)
    probes: list[tuple[Fraction, int]] = []

    def k_all_at(x: Fraction) -> int:
        total = sum(
            _proportional_quotas_at(curves, ratios, active, x).values()
        )
        probes.append((x, total))
        return total

    if search_strategy == SEARCH_FIXED_STEP:
        if step_size <= 0:
            raise ValidationError("step_size must be positive")
        step = Fraction(step_size)
        # x_sat makes every (uncapped) target reach 1, so the total
        # saturates at `reachable` >= size there.
        x_sat = max(Fraction(1) / ratios[cat] for cat in active)
        hi = 0
        if x_sat > x_init:
            hi = math.ceil((x_sat - x_init) / step)
        while k_all_at(x_init + hi * step) < size:
            hi = max(hi * 2, 1)  # guard; unreachable by construction
        lo = 0
        if k_all_at(x_init) >= size:
            steps_taken = 0
        else:
            # smallest m with k_all(x_init + m*step) >= size
            while lo + 1 < hi:
                mid = (lo + hi) // 2
                if k_all_at(x_init + mid * step) >= size:
                    hi = mid
                else:
                    lo = mid
            steps_taken = hi
        x_final = x_init + steps_taken * step
        quota_map = _proportional_quotas_at(curves, ratios, active, x_final)
        _assert_monotone_path(probes)
        diagnostics = {
            "k_all": sum(quota_map.values()),
            "x_final": float(x_final),
            "steps_taken": steps_taken,
            "search_path": [
                {"x": float(x), "k_all": k} for x, k in sorted(set(probes))
            ],
        }
        undershoot = None
    else:
        candidates = {x_init}
        for cat in active:
            curve = curves[cat]
            y = curve.stats.positives
            for c in np.unique(curve.cum_positives):
                x_cand = Fraction(int(c), y) / ratios[cat]
                if x_cand > x_init:
                    candidates.add(x_cand)
        ordered = sorted(candidates)
        if k_all_at(x_init) >= size:
            x_final = x_init
            undershoot = None
        else:
            lo, hi = 0, len(ordered) - 1
            # k_all at the largest candidate saturates every target
            while lo < hi:
                mid = (lo + hi) // 2
                if k_all_at(ordered[mid]) >= size:
                    hi = mid
                else:
                    lo = mid + 1
            x_final = ordered[lo]
            under_x = ordered[lo - 1] if lo > 0 else x_init
            under_map = _proportional_quotas_at(curves, ratios, active, under_x)
            undershoot = {
                "x": float(under_x),
                "total": sum(under_map.values()),
                "quotas": {cat: under_map[cat] for cat in sorted(under_map)},
            }
        quota_map = _proportional_quotas_at(curves, ratios, active, x_final)
        _assert_monotone_path(probes)
        diagnostics = {
            "k_all": sum(quota_map.values()),
            "x_final": float(x_final),
            "search_path": [
                {"x": float(x), "k_all": k} for x, k in sorted(set(probes))
            ],
        }
        if undershoot is not None:
            diagnostics["undershoot"] = undershoot

    capped = []
    quotas = []
    for cat in sorted(curves):
        curve = curves[cat]
        k = quota_map[cat]
        raw_target = ratios[cat] * x_final
        if cat in active and raw_target > 1:
            capped.append(cat)
        target = min(Fraction(1), raw_target)
        quotas.append(
            GroupQuota(
                group=cat,
                k=k,
                target_recall=float(target),
                achieved_recall=curve.recall_at(k),
                r_g=float(ratios[cat]),
            )
        )
    if capped:
        diagnostics["targets_capped_at_1"] = capped
    return SelectionPlan(
        quotas=tuple(quotas),
        step_size=step_size if search_strategy == SEARCH_FIXED_STEP else None,
        search_strategy=search_strategy,
        warnings=tuple(warnings),
        diagnostics=diagnostics,
        **base,
    )


def proportional_prefix_by_size(
    curves: Mapping[str, RollingRecallCurve],
    reference_group: str,
    size: int,
    group_tie_order: Sequence[str] | None = None,
) -> SelectionPlan:
    """Exact-budget refinement of the proportional size search: merge all
    entries by prevalence-scaled rolling recall (R / r_g) and take the
    first `size`. Equivalent to the breakpoint search except that the
    boundary plateau is admitted only partially, so the total is exact."""
    tie_break, seed = _check_curves(curves)
    ratios = _ratios(curves, reference_group)
    active, zero = _split_zero_positive(curves)
    if size < 0:
        raise ValidationError(f"size must be non-negative, got {size}")
    reachable = sum(curves[cat].stats.n for cat in active)
    if size > reachable:
        raise BalanceError(
            f"budget {size} exceeds the {reachable} members reachable in "
            "groups with observed positives"
        )
    ranks = _group_tie_ranks(curves, group_tie_order)
    entries = []
    for cat in active:
        curve = curves[cat]
        y = curve.stats.positives
        r = ratios[cat]
        for i in range(curve.stats.n):
            z = Fraction(int(curve.cum_positives[i]), y) / r
            entries.append((z, i + 1, ranks[cat], cat))
    entries.sort()
    prefix = entries[:size]
    quota_map = {cat: 0 for cat in curves}
    for _, n, _, cat in prefix:
        quota_map[cat] = max(quota_map[cat], n)
    x_cut = prefix[-1][0] if prefix else None
    quotas = []
    for cat in sorted(curves):
        curve = curves[cat]
        k = quota_map[cat]
        target = None
        if cat in active and x_cut is not None:
            target = float(min(Fraction(1), ratios[cat] * x_cut))
        quotas.append(
            GroupQuota(
                group=cat,
                k=k,
                target_recall=target,
                achieved_recall=curve.recall_at(k),
                r_g=float(ratios[cat]),
            )
        )
    diagnostics = {"k_all": size}
    if x_cut is not None:
        diagnostics["x_final"] = float(x_cut)
    return SelectionPlan(
        mode=MODE_PROPORTIONAL,
        constraint=Constraint(CONSTRAINT_LIST_SIZE, size),
        quotas=tuple(quotas),
        reference_group=reference_group,
        search_strategy=SEARCH_MERGED_PREFIX,
        tie_break=tie_break,
        seed=seed,
        requested_k=size,
        warnings=_zero_positive_warnings(zero),
        diagnostics=diagnostics,
    )


def trim_trailing_negatives(
    plan: SelectionPlan, curves: Mapping[str, RollingRecallCurve]
) -> SelectionPlan:
    """Shrink each quota to the shortest prefix with the same rolling
    recall. Recall-0 prefixes trim to empty; totals may drop below a
    size budget and freed slots are not refilled."""
    new_quotas = []
    for q in plan.quotas:
        if q.group not in curves:
            raise ValidationError(f"no curve for group {q.group!r}")
        curve = curves[q.group]
        k = q.k
        if k > 0:
            cum = int(curve.cum_positives[k - 1])
            if cum == 0:
                k = 0
            else:
                k = int(np.searchsorted(curve.cum_positives, cum, side="left")) + 1
        if curve.recall_at(k) != q.achieved_recall:
            raise AssertionError("trim must preserve achieved recall")
        if k > q.k:
            raise AssertionError("trim must not increase a quota")
        new_quotas.append(replace(q, k=k))
    diagnostics = dict(plan.diagnostics)
    diagnostics["trimmed"] = True
    diagnostics["pre_trim_total"] = plan.total
    return replace(plan, quotas=tuple(new_quotas), diagnostics=diagnostics)


def realize_selection(
    plan: SelectionPlan,
    cohort: Cohort,
    attribute: str,
    tie_break: str | None = None,
    seed: int | None = None,
) -> list[str]:
    """Entity ids selected by the plan: each group's top k_g under the
    same ordering that built the curves. Groups appear in plan order,
    members in rank order."""
    tie_break = tie_break or plan.tie_break
    seed = plan.seed if seed is None else seed
    curves = build_curves(cohort, attribute, tie_break, seed)
    plan_groups = {q.group for q in plan.quotas}
    if plan_groups != set(curves):
        raise ValidationError(
            f"plan groups {sorted(plan_groups)} do not match cohort "
            f"categories {sorted(curves)} for {attribute!r}"
        )
    out: list[str] = []
    for q in plan.quotas:
        out.extend(curves[q.group].ordered_entity_ids[: q.k])
    return out


def select_ids_from_curves(
    plan: SelectionPlan, curves: Mapping[str, RollingRecallCurve]
) -> list[str]:
    """Same output as realize_selection when the curves are already at
    hand (they carry the ordering)."""
    out: list[str] = []
    for q in plan.quotas:
        out.extend(curves[q.group].ordered_entity_ids[: q.k])
    return out


def run_balance(
    cohort: Cohort, attribute: str, spec: BalanceSpec
) -> SelectionPlan:
    """Build curves per the spec's tie rule and dispatch on mode and
    constraint; applies the trim post-pass when requested."""
    curves = build_curves(cohort, attribute, spec.tie_break, spec.seed)
    kind = spec.constraint.kind
    if spec.mode == MODE_EQUALIZED:
        if kind == CONSTRAINT_RECALL_TARGET:
            plan = balance_equalized_by_recall(curves, spec.constraint.value)
        else:
            plan = balance_equalized_by_size(curves, int(spec.constraint.value))
    else:
        if kind == CONSTRAINT_REFERENCE_RECALL:
            plan = balance_proportional_by_ref_recall(
                curves, spec.reference_group, spec.constraint.value
            )
        elif spec.search_strategy == SEARCH_MERGED_PREFIX:
            plan = proportional_prefix_by_size(
                curves, spec.reference_group, int(spec.constraint.value)
            )
        else:
            plan = balance_proportional_by_size(
                curves,
                spec.reference_group,
                int(spec.constraint.value),
                step_size=spec.step_size,
                search_strategy=spec.search_strategy,
            )
    if spec.trim:
        plan = trim_trailing_negatives(plan, curves)
    return plan
