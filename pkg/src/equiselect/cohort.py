"""Cohort data model and score-file ingestion.

A cohort is an immutable collection of scored, labeled examples with
zero or more declared group attributes. Files are UTF-8 CSV with a
header; column names are supplied by an IngestConfig. Missing group
values map to the reserved category "unknown" so that such individuals
are audited as a first-class group rather than dropped.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import BinaryIO, Iterable, Mapping, TextIO

import numpy as np

from .errors import DataError, ValidationError

UNKNOWN_CATEGORY = "unknown"
ENTITY_COL = "entity_id"

__all__ = [
    "UNKNOWN_CATEGORY",
    "ScoredExample",
    "Provenance",
    "Cohort",
    "IngestConfig",
    "parse_score_file",
    "write_score_file",
    "partition_by_group",
]


@dataclass(frozen=True, slots=True)
class ScoredExample:
    """One person-level prediction: a score, a binary outcome label, and
    group memberships keyed by attribute name."""

    entity_id: str
    score: float
    label: int
    group_values: Mapping[str, str] = field(default_factory=dict)
    as_of_date: dt.date | None = None
    model_id: str | None = None

    def __post_init__(self) -> None:
        if not self.entity_id:
            raise DataError("entity_id must be non-empty")
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")
        if not math.isfinite(self.score):
            raise DataError(f"score must be finite, got {self.score!r}")

    @property
    def key(self) -> tuple[str, str, str]:
        """Uniqueness key within a cohort."""
        return (
            self.entity_id,
            self.model_id or "",
            self.as_of_date.isoformat() if self.as_of_date else "",
        )


@dataclass(frozen=True)
class Provenance:
    source: str
    ingested_at: str


@dataclass(frozen=True, eq=False)
class Cohort:
    """Immutable container of examples plus declared group attributes.

    Provenance is carried for reporting but excluded from equality so
    that serialize/re-parse round-trips compare equal field-by-field.
    """

    examples: tuple[ScoredExample, ...]
    attributes: tuple[str, ...]
    provenance: Provenance | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "examples", tuple(self.examples))
        object.__setattr__(self, "attributes", tuple(self.attributes))
        seen: dict[tuple[str, str, str], int] = {}
        for i, ex in enumerate(self.examples):
            k = ex.key
            if k in seen:
                raise DataError(
                    f"duplicate key {k} at rows {seen[k]} and {i}"
                )
            seen[k] = i
            for attr in self.attributes:
                if attr not in ex.group_values:
                    raise DataError(
                        f"example {ex.entity_id!r} missing value for "
                        f"attribute {attr!r}"
                    )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Cohort):
            return NotImplemented
        return (
            self.examples == other.examples
            and self.attributes == other.attributes
        )

    def __hash__(self) -> int:
        return hash((self.examples, self.attributes))

    def __len__(self) -> int:
        return len(self.examples)

    @cached_property
    def summary(self) -> dict:
        """Validation summary: row count and per-attribute category counts."""
        counts: dict[str, dict[str, int]] = {a: {} for a in self.attributes}
        for ex in self.examples:
            for attr in self.attributes:
                cat = ex.group_values[attr]
                counts[attr][cat] = counts[attr].get(cat, 0) + 1
        return {
            "rows": len(self.examples),
            "attributes": {
                a: dict(sorted(c.items())) for a, c in counts.items()
            },
        }

    def categories(self, attribute: str) -> list[str]:
        if attribute not in self.attributes:
            raise ValidationError(f"unknown attribute {attribute!r}")
        return list(self._columns["attrs"][attribute][1])

    # Column cache. Downstream audit and balance operations work on flat
    # arrays; building them once per cohort keeps those operations fast
    # on large cohorts without changing the example-level data model.
    @cached_property
    def _columns(self) -> dict:
        n = len(self.examples)
        scores = np.fromiter(
            (ex.score for ex in self.examples), dtype=np.float64, count=n
        )
        labels = np.fromiter(
            (ex.label for ex in self.examples), dtype=np.int64, count=n
        )
        ids = [ex.entity_id for ex in self.examples]
        id_arr = np.array(ids, dtype=np.str_)
        model_arr = np.array(
            [ex.model_id or "" for ex in self.examples], dtype=np.str_
        )
        date_arr = np.array(
            [ex.as_of_date.isoformat() if ex.as_of_date else ""
             for ex in self.examples],
            dtype=np.str_,
        )
        # Rank of each example under the deterministic (entity_id,
        # model_id, as_of_date) order; the key is unique, so the rank is
        # a strict total order independent of input permutation.
        order = np.lexsort((date_arr, model_arr, id_arr))
        tie_rank = np.empty(n, dtype=np.int64)
        tie_rank[order] = np.arange(n, dtype=np.int64)
        attrs: dict[str, tuple[np.ndarray, tuple[str, ...]]] = {}
        for attr in self.attributes:
            values = np.array(
                [ex.group_values[attr] for ex in self.examples], dtype=np.str_
            )
            cats, codes = np.unique(values, return_inverse=True)
            attrs[attr] = (codes.astype(np.int64), tuple(str(c) for c in cats))
        return {
            "scores": scores,
            "labels": labels,
            "ids": ids,
            "tie_rank": tie_rank,
            "attrs": attrs,
        }


@dataclass(frozen=True)
class IngestConfig:
    """Column mapping for score files. The entity id column is always
    named "entity_id"; everything else is configurable."""

    score_col: str = "score"
    label_col: str = "label"
    attribute_cols: tuple[str, ...] = ()
    date_col: str = "as_of_date"
    model_col: str = "model_id"

    def __post_init__(self) -> None:
        object.__setattr__(self, "attribute_cols", tuple(self.attribute_cols))

    @classmethod
    def from_json(cls, text: str | bytes) -> "IngestConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid ingest config JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise DataError("ingest config must be a JSON object")
        known = {
            "score_col", "label_col", "attribute_cols", "date_col", "model_col"
        }
        unknown = set(raw) - known
        if unknown:
            raise DataError(f"unknown ingest config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_json(self) -> str:
        return json.dumps(
            {
                "score_col": self.score_col,
                "label_col": self.label_col,
                "attribute_cols": list(self.attribute_cols),
                "date_col": self.date_col,
                "model_col": self.model_col,
            },
            indent=2,
        )


def _open_source(source) -> tuple[TextIO, str]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline=""), str(source)
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8")), "<bytes>"
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        name = getattr(source, "name", "<stream>")
        return io.StringIO(data), str(name)
    raise DataError(f"unsupported score file source: {type(source).__name__}")


def _parse_label(token: str, line: int) -> int:
    token = token.strip()
    if token == "0":
        return 0
    if token == "1":
        return 1
    raise DataError(f"line {line}: label must be 0 or 1, got {token!r}")


def _parse_score(token: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError as exc:
        raise DataError(
            f"line {line}: malformed score {token!r}"
        ) from exc
    if not math.isfinite(value):
        raise DataError(f"line {line}: score must be finite, got {token!r}")
    return value


def _parse_date(token: str, line: int) -> dt.date | None:
    token = token.strip()
    if not token:
        return None
    try:
        return dt.date.fromisoformat(token)
    except ValueError as exc:
        raise DataError(
            f"line {line}: malformed as_of_date {token!r}"
        ) from exc


def parse_score_file(
    source: str | os.PathLike | bytes | BinaryIO | TextIO,
    schema: IngestConfig | None = None,
) -> Cohort:
    """Parse a UTF-8 CSV score file into a Cohort.

    The header row is required. Rows with empty group cells get the
    reserved category "unknown". Malformed scores, labels outside {0,1},
    duplicate (entity_id, model_id, as_of_date) keys, and empty files
    are all rejected with the offending line number.
    """
    schema = schema or IngestConfig()
    stream, source_name = _open_source(source)
    try:
        reader = csv.reader(stream)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty score file (no header row)") from None
        col_index = {name: i for i, name in enumerate(header)}
        required = [ENTITY_COL, schema.score_col, schema.label_col]
        required.extend(schema.attribute_cols)
        missing = [c for c in required if c not in col_index]
        if missing:
            raise DataError(f"score file missing columns: {missing}")
        has_date = schema.date_col in col_index
        has_model = schema.model_col in col_index

        def cell(row: list[str], col: str) -> str:
            idx = col_index[col]
            return row[idx] if idx < len(row) else ""

        examples: list[ScoredExample] = []
        seen: dict[tuple[str, str, str], int] = {}
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            entity_id = cell(row, ENTITY_COL).strip()
            if not entity_id:
                raise DataError(f"line {line}: empty entity_id")
            score = _parse_score(cell(row, schema.score_col), line)
            label = _parse_label(cell(row, schema.label_col), line)
            group_values = {}
            for attr in schema.attribute_cols:
                value = cell(row, attr).strip()
                group_values[attr] = value if value else UNKNOWN_CATEGORY
            as_of = _parse_date(cell(row, schema.date_col), line) if has_date else None
            model = cell(row, schema.model_col).strip() if has_model else ""
            ex = ScoredExample(
                entity_id=entity_id,
                score=score,
                label=label,
                group_values=group_values,
                as_of_date=as_of,
                model_id=model or None,
            )
            key = ex.key
            if key in seen:
                raise DataError(
                    f"duplicate key {key}: lines {seen[key]} and {line}"
                )
            seen[key] = line
            examples.append(ex)
    finally:
        stream.close()
    if not examples:
        raise DataError("score file contains no data rows")
    provenance = Provenance(
        source=source_name,
        ingested_at=dt.datetime.now(dt.timezone.utc).isoformat(),
    )
    return Cohort(
        examples=tuple(examples),
        attributes=tuple(schema.attribute_cols),
        provenance=provenance,
    )


def write_score_file(cohort: Cohort, dest: str | os.PathLike | TextIO) -> None:
    """Serialize a cohort back to score-file CSV. Floats are written in
    shortest round-trip form, so parse(write(c)) == c."""
    own = isinstance(dest, (str, os.PathLike))
    stream = open(dest, "w", encoding="utf-8", newline="") if own else dest
    try:
        has_date = any(ex.as_of_date is not None for ex in cohort.examples)
        has_model = any(ex.model_id is not None for ex in cohort.examples)
        header = [ENTITY_COL, "score", "label", *cohort.attributes]
        if has_date:
            header.append("as_of_date")
        if has_model:
            header.append("model_id")
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for ex in cohort.examples:
            row = [ex.entity_id, repr(ex.score), str(ex.label)]
            row.extend(ex.group_values[a] for a in cohort.attributes)
            if has_date:
                row.append(ex.as_of_date.isoformat() if ex.as_of_date else "")
            if has_model:
                row.append(ex.model_id or "")
            writer.writerow(row)
    finally:
        if own:
            stream.close()


def partition_by_group(
    cohort: Cohort, attribute: str
) -> dict[str, list[ScoredExample]]:
    """Split a cohort by one attribute. Partitions are exhaustive and
    disjoint; categories are returned in sorted order."""
    if attribute not in cohort.attributes:
        raise ValidationError(f"unknown attribute {attribute!r}")
    parts: dict[str, list[ScoredExample]] = {}
    for ex in cohort.examples:
        parts.setdefault(ex.group_values[attribute], []).append(ex)
    return dict(sorted(parts.items()))


def cohort_from_rows(
    rows: Iterable[tuple], attributes: Iterable[str] = (), attribute: str | None = None
) -> Cohort:
    """Convenience constructor used by tests and the synthesizer:
    rows of (entity_id, score, label, category) with a single attribute,
    or (entity_id, score, label) with none."""
    attrs = tuple(attributes) or ((attribute,) if attribute else ())
    examples = []
    for row in rows:
        if attrs:
            eid, score, label, cat = row
            gv = {attrs[0]: cat}
        else:
            eid, score, label = row[:3]
            gv = {}
        examples.append(
            ScoredExample(entity_id=eid, score=float(score), label=int(label),
                          group_values=gv)
        )
    return Cohort(examples=tuple(examples), attributes=attrs)
