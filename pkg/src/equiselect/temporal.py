"""Backtesting across modeling dates and stability-aware model choice.

Score sets are evaluated at a series of historical modeling dates, each
on its own forward label window, and the per-date precisions feed one of
three explicit selection rules. Per-split values are always carried in
the output so a human can second-guess the rule.
"""

from __future__ import annotations

import calendar
import datetime as dt
import statistics
from dataclasses import dataclass
from typing import Mapping, Sequence

from ._ordering import BY_ENTITY_ID, validate_tie_break
from .balancer import _sort_key_for
from .cohort import Cohort, ScoredExample
from .errors import DataError, ValidationError

RULE_MEAN_MINUS_STDDEV = "mean_minus_lambda_stddev"
RULE_BEST_MEAN = "best_mean"
RULE_MIN_REGRET = "min_regret"
RULES = (RULE_MEAN_MINUS_STDDEV, RULE_BEST_MEAN, RULE_MIN_REGRET)

MODE_STRICT = "strict"
MODE_LENIENT = "lenient"

DEFAULT_MODEL_ID = "default"

__all__ = [
    "TemporalConfig",
    "TemporalSplit",
    "SplitEvaluation",
    "SelectionRule",
    "TemporalEvalResult",
    "add_months",
    "generate_splits",
    "evaluate_split",
    "select_model",
    "run_temporal_eval",
]


def add_months(date: dt.date, months: int) -> dt.date:
    """Calendar month stepping with day-of-month clamping, so
    Jan 31 + 1 month lands on the last day of February."""
    index = date.year * 12 + (date.month - 1) + months
    year, month = divmod(index, 12)
    month += 1
    day = min(date.day, calendar.monthrange(year, month)[1])
    return dt.date(year, month, day)


@dataclass(frozen=True, slots=True)
class TemporalConfig:
    start_date: dt.date
    end_date: dt.date
    interval_months: int
    label_window_months: int
    k: int

    def __post_init__(self) -> None:
        if self.start_date > self.end_date:
            raise ValidationError("start_date must not be after end_date")
        if self.interval_months <= 0:
            raise ValidationError("interval_months must be positive")
        if self.label_window_months <= 0:
            raise ValidationError("label_window_months must be positive")
        if self.k <= 0:
            raise ValidationError("k must be positive")

    @classmethod
    def from_payload(cls, raw: Mapping) -> "TemporalConfig":
        if not isinstance(raw, Mapping):
            raise ValidationError("temporal config must be a JSON object")
        known = {"start_date", "end_date", "interval_months",
                 "label_window_months", "k"}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown temporal config keys: {sorted(unknown)}")
        missing = known - set(raw)
        if missing:
            raise ValidationError(f"temporal config missing keys: {sorted(missing)}")
        try:
            return cls(
                start_date=dt.date.fromisoformat(raw["start_date"]),
                end_date=dt.date.fromisoformat(raw["end_date"]),
                interval_months=int(raw["interval_months"]),
                label_window_months=int(raw["label_window_months"]),
                k=int(raw["k"]),
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"invalid temporal config: {exc}") from exc

    def to_payload(self) -> dict:
        return {
            "start_date": self.start_date.isoformat(),
            "end_date": self.end_date.isoformat(),
            "interval_months": self.interval_months,
            "label_window_months": self.label_window_months,
            "k": self.k,
        }


@dataclass(frozen=True, slots=True)
class TemporalSplit:
    """One modeling date with its forward evaluation window
    [modeling_date, modeling_date + label window)."""

    modeling_date: dt.date
    window_end: dt.date

    def __post_init__(self) -> None:
        # leakage guard: the window may never reach back before the date
        if self.window_end <= self.modeling_date:
            raise ValidationError("evaluation window must extend forward")

    @property
    def window_start(self) -> dt.date:
        return self.modeling_date

    def to_payload(self) -> dict:
        return {
            "modeling_date": self.modeling_date.isoformat(),
            "window_start": self.window_start.isoformat(),
            "window_end": self.window_end.isoformat(),
        }


@dataclass(frozen=True, slots=True)
class SplitEvaluation:
    model_id: str
    modeling_date: dt.date
    precision_at_k: float
    n_evaluated: int
    k_effective: int

    def __post_init__(self) -> None:
        if not 0 <= self.precision_at_k <= 1:
            raise ValidationError("precision must lie in [0, 1]")
        if self.k_effective > self.n_evaluated:
            raise ValidationError("k_effective cannot exceed n_evaluated")

    def to_payload(self) -> dict:
        return {
            "model_id": self.model_id,
            "modeling_date": self.modeling_date.isoformat(),
            "precision_at_k": self.precision_at_k,
            "n_evaluated": self.n_evaluated,
            "k_effective": self.k_effective,
        }


@dataclass(frozen=True, slots=True)
class SelectionRule:
    rule: str = RULE_MEAN_MINUS_STDDEV
    lambda_: float | None = 1.0

    def __post_init__(self) -> None:
        if self.rule not in RULES:
            raise ValidationError(f"unknown selection rule {self.rule!r}")
        if self.rule == RULE_MEAN_MINUS_STDDEV:
            if self.lambda_ is None:
                raise ValidationError(f"{self.rule} requires lambda")
            if self.lambda_ < 0:
                raise ValidationError("lambda must be non-negative")
        elif self.lambda_ is not None:
            raise ValidationError(f"lambda applies only to {RULE_MEAN_MINUS_STDDEV}")

    @classmethod
    def from_payload(cls, raw: Mapping) -> "SelectionRule":
        if not isinstance(raw, Mapping):
            raise ValidationError("selection rule must be a JSON object")
        unknown = set(raw) - {"rule", "lambda"}
        if unknown:
            raise ValidationError(f"unknown rule keys: {sorted(unknown)}")
        rule = raw.get("rule", RULE_MEAN_MINUS_STDDEV)
        lam = raw.get("lambda")
        if lam is None and rule == RULE_MEAN_MINUS_STDDEV:
            lam = 1.0
        return cls(rule=rule, lambda_=float(lam) if lam is not None else None)

    def to_payload(self) -> dict:
        return {"rule": self.rule, "lambda": self.lambda_}


def generate_splits(cfg: TemporalConfig) -> list[TemporalSplit]:
    """Modeling dates at start, start + interval, ... while <= end,
    end inclusive when the stepping lands on it."""
    splits = []
    step = 0
    while True:
        date = add_months(cfg.start_date, step * cfg.interval_months)
        if date > cfg.end_date:
            break
        splits.append(
            TemporalSplit(
                modeling_date=date,
                window_end=add_months(date, cfg.label_window_months),
            )
        )
        step += 1
    return splits


def _as_examples(scores) -> list[ScoredExample]:
    if isinstance(scores, Cohort):
        return list(scores.examples)
    return list(scores)


def evaluate_split(
    scores: Cohort | Sequence[ScoredExample],
    split: TemporalSplit,
    k: int,
    mode: str = MODE_STRICT,
    tie_break: str = BY_ENTITY_ID,
    seed: int | None = None,
) -> SplitEvaluation:
    """Precision among the top k of one model's scores at one modeling
    date. Strict mode refuses score sets shorter than k; lenient mode
    evaluates what is there and records k_effective."""
    if mode not in (MODE_STRICT, MODE_LENIENT):
        raise ValidationError(f"unknown evaluation mode {mode!r}")
    if k <= 0:
        raise ValidationError("k must be positive")
    seed = validate_tie_break(tie_break, seed)
    examples = _as_examples(scores)
    if not examples:
        raise ValidationError("no scores to evaluate")
    models = {ex.model_id or DEFAULT_MODEL_ID for ex in examples}
    if len(models) > 1:
        raise ValidationError(
            f"evaluate_split takes one model's scores, got {sorted(models)}"
        )
    for ex in examples:
        if ex.as_of_date != split.modeling_date:
            raise ValidationError(
                f"example {ex.entity_id!r} is dated {ex.as_of_date}, not the "
                f"modeling date {split.modeling_date} (would leak across splits)"
            )
    n = len(examples)
    if n < k and mode == MODE_STRICT:
        raise DataError(
            f"{n} scores at {split.modeling_date} is fewer than k={k}; "
            "use lenient mode to evaluate short lists"
        )
    k_effective = min(k, n)
    ordered = sorted(examples, key=_sort_key_for(tie_break, seed))
    hits = sum(ex.label for ex in ordered[:k_effective])
    return SplitEvaluation(
        model_id=models.pop(),
        modeling_date=split.modeling_date,
        precision_at_k=hits / k_effective,
        n_evaluated=n,
        k_effective=k_effective,
    )


def select_model(
    evaluations: Sequence[SplitEvaluation], rule: SelectionRule
) -> list[tuple[str, float]]:
    """Rank models by the rule's score, best first.

    mean_minus_lambda_stddev and best_mean score higher-is-better;
    min_regret scores each model by its mean shortfall from the best
    precision observed at each of its splits, lower-is-better. Ties
    break by model_id.
    """
    if not evaluations:
        raise ValidationError("no evaluations to rank")
    by_model: dict[str, list[SplitEvaluation]] = {}
    for ev in evaluations:
        by_model.setdefault(ev.model_id, []).append(ev)
    for model, evs in by_model.items():
        dates = [ev.modeling_date for ev in evs]
        if len(set(dates)) != len(dates):
            raise ValidationError(
                f"model {model!r} has duplicate evaluations for one date"
            )

    if rule.rule == RULE_MEAN_MINUS_STDDEV:
        for model, evs in by_model.items():
            if len(evs) < 2:
                raise ValidationError(
                    f"model {model!r} has {len(evs)} evaluation(s); the "
                    "stddev-based rule needs at least 2"
                )
        scored = {}
        for model, evs in by_model.items():
            precisions = [ev.precision_at_k for ev in evs]
            scored[model] = (
                statistics.mean(precisions)
                - rule.lambda_ * statistics.pstdev(precisions)
            )
        reverse = True
    elif rule.rule == RULE_BEST_MEAN:
        scored = {
            model: statistics.mean([ev.precision_at_k for ev in evs])
            for model, evs in by_model.items()
        }
        reverse = True
    else:
        best_at: dict[dt.date, float] = {}
        for ev in evaluations:
            cur = best_at.get(ev.modeling_date)
            if cur is None or ev.precision_at_k > cur:
                best_at[ev.modeling_date] = ev.precision_at_k
        scored = {
            model: statistics.mean(
                [best_at[ev.modeling_date] - ev.precision_at_k for ev in evs]
            )
            for model, evs in by_model.items()
        }
        reverse = False

    ordered = sorted(
        scored.items(),
        key=lambda item: (-item[1] if reverse else item[1], item[0]),
    )
    return [(model, score) for model, score in ordered]


@dataclass(frozen=True)
class TemporalEvalResult:
    config: TemporalConfig
    rule: SelectionRule
    splits: tuple[TemporalSplit, ...]
    evaluations: tuple[SplitEvaluation, ...]
    ranking: tuple[tuple[str, float], ...]
    entity_overlap: dict

    def to_payload(self) -> dict:
        return {
            "config": self.config.to_payload(),
            "rule": self.rule.to_payload(),
            "splits": [s.to_payload() for s in self.splits],
            "evaluations": [e.to_payload() for e in self.evaluations],
            "ranking": [
                {"model_id": m, "score": s} for m, s in self.ranking
            ],
            "entity_overlap": self.entity_overlap,
        }


def run_temporal_eval(
    cohort: Cohort,
    cfg: TemporalConfig,
    rule: SelectionRule | None = None,
    mode: str = MODE_STRICT,
    tie_break: str = BY_ENTITY_ID,
    seed: int | None = None,
) -> TemporalEvalResult:
    """Evaluate every (model, modeling date) pair present in the cohort
    and rank the models.

    Rows whose as_of_date is not one of the generated modeling dates are
    ignored. Entity overlap across modeling dates is reported
    informationally; overlapping cohorts are not an error.
    """
    rule = rule or SelectionRule()
    splits = generate_splits(cfg)
    by_date = {s.modeling_date: s for s in splits}
    cells: dict[tuple[str, dt.date], list[ScoredExample]] = {}
    entity_dates: dict[str, set[dt.date]] = {}
    for ex in cohort.examples:
        if ex.as_of_date not in by_date:
            continue
        model = ex.model_id or DEFAULT_MODEL_ID
        cells.setdefault((model, ex.as_of_date), []).append(ex)
        entity_dates.setdefault(ex.entity_id, set()).add(ex.as_of_date)
    if not cells:
        raise DataError(
            "no rows fall on any modeling date; check as_of_date values"
        )
    evaluations = [
        evaluate_split(exs, by_date[date], cfg.k, mode, tie_break, seed)
        for (model, date), exs in sorted(cells.items())
    ]
    ranking = select_model(evaluations, rule)
    multi = sum(1 for dates in entity_dates.values() if len(dates) > 1)
    overlap = {
        "entities_evaluated": len(entity_dates),
        "entities_in_multiple_splits": multi,
        "note": (
            "entities appearing at several modeling dates are evaluated "
            "in each; reported for awareness, not an error"
        ),
    }
    return TemporalEvalResult(
        config=cfg,
        rule=rule,
        splits=tuple(splits),
        evaluations=tuple(evaluations),
        ranking=tuple(ranking),
        entity_overlap=overlap,
    )
