"""Deterministic synthetic cohorts with controllable group structure.

Each group draws scores from a pair of Beta distributions on the unit
interval, one for positives and one for negatives. A group's
separability s >= 0 sets how far apart the two distributions sit:
their means are 0.5 +/- d/2 with d = s / (s + 1), and both share
concentration kappa = 4 + 4s. At s = 0 the distributions coincide
(scores carry no signal, so top-k precision concentrates at the
prevalence); as s grows the positive and negative masses pull apart and
ranking quality rises monotonically toward perfect separation.

Positive counts are exact: round(n * prevalence) per group, never a
random draw, so tests can reason about recall granularity 1/Y_g.

Generation is fully deterministic for a given spec and seed. Every
group uses its own random substream keyed by (seed, hash(category)), so
neither the listing order of groups nor the presence of other groups
changes a group's rows. The final row order is a seeded interleave of
all groups.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .cohort import Cohort, ScoredExample
from .errors import ValidationError

DEFAULT_ATTRIBUTE = "group"

__all__ = ["GroupSpec", "SynthSpec", "generate_population"]


@dataclass(frozen=True, slots=True)
class GroupSpec:
    category: str
    n: int
    prevalence: float
    separability: float = 1.0

    def __post_init__(self) -> None:
        if not self.category:
            raise ValidationError("group category must be non-empty")
        if self.n < 0:
            raise ValidationError(f"group size must be >= 0, got {self.n}")
        if not 0 <= self.prevalence <= 1:
            raise ValidationError(
                f"prevalence must lie in [0, 1], got {self.prevalence!r}"
            )
        if self.separability < 0:
            raise ValidationError(
                f"separability must be >= 0, got {self.separability!r}"
            )

    @property
    def positives(self) -> int:
        return round(self.n * self.prevalence)


@dataclass(frozen=True)
class SynthSpec:
    groups: tuple[GroupSpec, ...]
    attribute: str = DEFAULT_ATTRIBUTE
    seed: int = 0
    quantize: int | None = None
    as_of_date: dt.date | None = None
    model_id: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(self.groups))
        if not self.groups:
            raise ValidationError("spec needs at least one group")
        cats = [g.category for g in self.groups]
        if len(set(cats)) != len(cats):
            raise ValidationError("group categories must be unique")
        if not self.attribute:
            raise ValidationError("attribute name must be non-empty")
        if self.quantize is not None and self.quantize < 0:
            raise ValidationError("quantize must be >= 0 decimal places")

    @classmethod
    def from_payload(cls, raw: Mapping) -> "SynthSpec":
        if not isinstance(raw, Mapping):
            raise ValidationError("synth spec must be a JSON object")
        known = {"groups", "attribute", "seed", "quantize", "as_of_date",
                 "model_id"}
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown synth spec keys: {sorted(unknown)}")
        groups_raw = raw.get("groups")
        if not isinstance(groups_raw, list) or not groups_raw:
            raise ValidationError("synth spec requires a non-empty groups list")
        groups = []
        for g in groups_raw:
            if not isinstance(g, Mapping):
                raise ValidationError("each group must be a JSON object")
            extra = set(g) - {"category", "n", "prevalence", "separability"}
            if extra:
                raise ValidationError(f"unknown group keys: {sorted(extra)}")
            try:
                groups.append(
                    GroupSpec(
                        category=g["category"],
                        n=int(g["n"]),
                        prevalence=float(g["prevalence"]),
                        separability=float(g.get("separability", 1.0)),
                    )
                )
            except KeyError as exc:
                raise ValidationError(f"group missing key: {exc}") from exc
        date = raw.get("as_of_date")
        try:
            parsed_date = dt.date.fromisoformat(date) if date else None
        except ValueError as exc:
            raise ValidationError(f"invalid as_of_date: {exc}") from exc
        quantize = raw.get("quantize")
        return cls(
            groups=tuple(groups),
            attribute=raw.get("attribute", DEFAULT_ATTRIBUTE),
            seed=int(raw.get("seed", 0)),
            quantize=int(quantize) if quantize is not None else None,
            as_of_date=parsed_date,
            model_id=raw.get("model_id"),
        )

    @classmethod
    def from_json(cls, text: str | bytes) -> "SynthSpec":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid synth spec JSON: {exc}") from exc
        return cls.from_payload(raw)

    def to_payload(self) -> dict:
        return {
            "groups": [
                {
                    "category": g.category,
                    "n": g.n,
                    "prevalence": g.prevalence,
                    "separability": g.separability,
                }
                for g in self.groups
            ],
            "attribute": self.attribute,
            "seed": self.seed,
            "quantize": self.quantize,
            "as_of_date": self.as_of_date.isoformat() if self.as_of_date else None,
            "model_id": self.model_id,
        }


def _substream(seed: int, label: str) -> np.random.Generator:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(
        np.random.SeedSequence([seed, int.from_bytes(digest, "big")])
    )


def _beta_params(separability: float) -> tuple[float, float, float, float]:
    d = separability / (separability + 1.0)
    kappa = 4.0 + 4.0 * separability
    mu_pos = 0.5 + d / 2.0
    mu_neg = 0.5 - d / 2.0
    return (
        mu_pos * kappa, (1.0 - mu_pos) * kappa,
        mu_neg * kappa, (1.0 - mu_neg) * kappa,
    )


def _group_rows(group: GroupSpec, spec: SynthSpec) -> list[ScoredExample]:
    rng = _substream(spec.seed, group.category)
    y = group.positives
    a_pos, b_pos, a_neg, b_neg = _beta_params(group.separability)
    scores = np.empty(group.n, dtype=np.float64)
    scores[:y] = rng.beta(a_pos, b_pos, size=y)
    scores[y:] = rng.beta(a_neg, b_neg, size=group.n - y)
    if spec.quantize is not None:
        scores = np.round(scores, spec.quantize)
    labels = np.zeros(group.n, dtype=np.int64)
    labels[:y] = 1
    # shuffle within the group so the entity id carries no label signal
    perm = rng.permutation(group.n)
    scores, labels = scores[perm], labels[perm]
    group_values = {spec.attribute: group.category}
    return [
        ScoredExample(
            entity_id=f"{group.category}-{i:07d}",
            score=float(scores[i]),
            label=int(labels[i]),
            group_values=group_values,
            as_of_date=spec.as_of_date,
            model_id=spec.model_id,
        )
        for i in range(group.n)
    ]


def generate_population(spec: SynthSpec) -> Cohort:
    """Draw the cohort described by the spec. Same spec and seed always
    produce the identical cohort, row for row."""
    per_group = [
        _group_rows(group, spec)
        for group in sorted(spec.groups, key=lambda g: g.category)
    ]
    rows = [ex for group_rows in per_group for ex in group_rows]
    interleave = _substream(spec.seed, "\x00interleave").permutation(len(rows))
    return Cohort(
        examples=tuple(rows[i] for i in interleave),
        attributes=(spec.attribute,),
    )
