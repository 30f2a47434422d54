"""Decision framework mapping program characteristics to a parity metric.

The mapping itself lives in a declarative rule table shipped with the
package (data/fairness_rules.json), keyed by program nature, scale, and
whose outcomes the program's stakeholders care most about. The code here
validates the context, looks up the rule, and attaches caveats, some of
which depend on the selection fraction when one is known.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Mapping

from .errors import ValidationError

NATURE_PUNITIVE = "punitive"
NATURE_ASSISTIVE = "assistive"
NATURES = (NATURE_PUNITIVE, NATURE_ASSISTIVE)

SCALE_SMALL = "small_fraction_of_need"
SCALE_SUBSTANTIAL = "substantial"
SCALES = (SCALE_SMALL, SCALE_SUBSTANTIAL)

FOCUS_EVERYONE = "everyone"
FOCUS_INTERVENED = "intervened_or_served"
FOCUS_UNSERVED = "not_intervened_or_unserved"
FOCUS_ACTUAL_NEED = "actual_need_or_unwarranted"
FOCUSES = (FOCUS_EVERYONE, FOCUS_INTERVENED, FOCUS_UNSERVED, FOCUS_ACTUAL_NEED)

# Selection fractions at or below this make FOR/FNR comparisons nearly
# vacuous; used only to attach hints, never to change the recommendation.
SMALL_PROGRAM_FRACTION = 0.05

TRADEOFF_CAVEAT = (
    "A single parity metric rarely captures every stakeholder concern; "
    "weighing several metrics together is often desirable. This "
    "recommendation reflects the single stated focus."
)

__all__ = [
    "FairnessContext",
    "MetricRecommendation",
    "recommend_metric",
    "valid_contexts",
    "rule_table",
]


@dataclass(frozen=True, slots=True)
class FairnessContext:
    """Program characteristics steering the recommendation.

    scale is required for assistive programs and must be omitted for
    punitive ones; focus is always required, though a small assistive
    program's recommendation does not depend on it.
    """

    nature: str
    focus: str
    scale: str | None = None

    def __post_init__(self) -> None:
        if self.nature not in NATURES:
            raise ValidationError(
                f"nature must be one of {NATURES}, got {self.nature!r}"
            )
        if self.focus not in FOCUSES:
            raise ValidationError(
                f"focus must be one of {FOCUSES}, got {self.focus!r}"
            )
        if self.nature == NATURE_ASSISTIVE:
            if self.scale is None:
                raise ValidationError("assistive programs require a scale")
            if self.scale not in SCALES:
                raise ValidationError(
                    f"scale must be one of {SCALES}, got {self.scale!r}"
                )
        elif self.scale is not None:
            raise ValidationError("scale applies only to assistive programs")
        if self.nature == NATURE_PUNITIVE and self.focus == FOCUS_UNSERVED:
            raise ValidationError(
                "punitive programs distinguish everyone, the intervened, and "
                "those without actual need; 'not_intervened_or_unserved' is "
                "not a punitive branch"
            )
        if (
            self.nature == NATURE_ASSISTIVE
            and self.scale == SCALE_SUBSTANTIAL
            and self.focus == FOCUS_INTERVENED
        ):
            raise ValidationError(
                "substantial assistive programs distinguish everyone, the "
                "unserved, and those with actual need; "
                "'intervened_or_served' is not a branch at that scale"
            )

    @classmethod
    def from_payload(cls, raw: Mapping) -> "FairnessContext":
        if not isinstance(raw, Mapping):
            raise ValidationError("context must be a JSON object")
        unknown = set(raw) - {"nature", "focus", "scale"}
        if unknown:
            raise ValidationError(f"unknown context keys: {sorted(unknown)}")
        if "nature" not in raw or "focus" not in raw:
            raise ValidationError("context requires nature and focus")
        return cls(
            nature=raw["nature"], focus=raw["focus"], scale=raw.get("scale")
        )

    def to_payload(self) -> dict:
        return {"nature": self.nature, "scale": self.scale, "focus": self.focus}


@dataclass(frozen=True)
class MetricRecommendation:
    metric: str
    metric_key: str
    rationale: str
    caveats: tuple[str, ...] = ()
    context: FairnessContext | None = None

    def to_payload(self) -> dict:
        return {
            "metric": self.metric,
            "metric_key": self.metric_key,
            "rationale": self.rationale,
            "caveats": list(self.caveats),
            "context": self.context.to_payload() if self.context else None,
        }


@lru_cache(maxsize=1)
def rule_table() -> dict:
    raw = (
        resources.files("equiselect").joinpath("data/fairness_rules.json")
        .read_text(encoding="utf-8")
    )
    table = json.loads(raw)
    for rule in table["rules"]:
        if rule["metric"] not in table["metrics"]:
            raise AssertionError(
                f"rule metric {rule['metric']!r} outside the closed set"
            )
    return table


def _find_rule(ctx: FairnessContext) -> dict:
    for rule in rule_table()["rules"]:
        if rule["nature"] != ctx.nature or rule["scale"] != ctx.scale:
            continue
        if rule["focus"] in ("*", ctx.focus):
            return rule
    raise AssertionError(f"no rule for {ctx}")  # context validation is exhaustive


def recommend_metric(
    ctx: FairnessContext, selection_fraction: float | None = None
) -> MetricRecommendation:
    """Deterministic lookup of the parity metric for a program context.

    When the caller knows the program's selection fraction (k over the
    audited population), passing it attaches degeneracy hints for
    metrics that lose their discriminating power at small scale.
    """
    if selection_fraction is not None and not 0 <= selection_fraction <= 1:
        raise ValidationError(
            f"selection_fraction must lie in [0, 1], got {selection_fraction!r}"
        )
    rule = _find_rule(ctx)
    caveats = list(rule["notes"])
    small = (
        selection_fraction is not None
        and selection_fraction <= SMALL_PROGRAM_FRACTION
    )
    if small and rule["metric_key"] == "fnr":
        caveats.append(
            f"At the given selection fraction ({selection_fraction:.1%}), "
            "every group's false negative rate is forced close to 1, so FNR "
            "gaps will look tiny regardless of how unevenly need is served. "
            "Consider recall parity, which carries the same ordering."
        )
    if small and rule["metric_key"] == "for":
        caveats.append(
            f"At the given selection fraction ({selection_fraction:.1%}), "
            "each group's false omission rate nearly equals its prevalence, "
            "so FOR parity mostly restates prevalence differences rather "
            "than anything the selection did."
        )
    caveats.append(TRADEOFF_CAVEAT)
    return MetricRecommendation(
        metric=rule["metric"],
        metric_key=rule["metric_key"],
        rationale=rule["rationale"],
        caveats=tuple(caveats),
        context=ctx,
    )


def valid_contexts() -> list[FairnessContext]:
    """Every well-formed context, in a stable order."""
    out = []
    for focus in (FOCUS_EVERYONE, FOCUS_INTERVENED, FOCUS_ACTUAL_NEED):
        out.append(FairnessContext(nature=NATURE_PUNITIVE, focus=focus))
    for focus in FOCUSES:
        out.append(
            FairnessContext(
                nature=NATURE_ASSISTIVE, scale=SCALE_SMALL, focus=focus
            )
        )
    for focus in (FOCUS_EVERYONE, FOCUS_UNSERVED, FOCUS_ACTUAL_NEED):
        out.append(
            FairnessContext(
                nature=NATURE_ASSISTIVE, scale=SCALE_SUBSTANTIAL, focus=focus
            )
        )
    return out
