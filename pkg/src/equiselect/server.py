"""Read-only HTTP facade over one loaded cohort.

The dataset is parsed once at startup into an immutable snapshot;
every request computes against that snapshot, so concurrent handlers
need no locks and identical requests return identical bytes. There are
no mutation endpoints: reloading data means restarting the process.

Responses are rendered through the same canonical JSON encoder the CLI
uses, which is what makes CLI/API byte parity hold.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response

from ._ordering import BY_ENTITY_ID, global_order
from .balancer import BalanceSpec, RollingRecallCurve, build_curves
from .cohort import Cohort
from .errors import BalanceError, DataError, ValidationError
from .metrics import GroupStats, audit_top_k, stats_by_group
from .reporting import build_tradeoff_menu, run_balance_with_audit, to_json_bytes

MAX_CURVE_POINTS = 5000


@dataclass(frozen=True)
class DatasetSnapshot:
    cohort: Cohort
    version: str
    stats: Mapping[str, Mapping[str, GroupStats]]
    curves: Mapping[str, Mapping[str, RollingRecallCurve]]


def build_snapshot(cohort: Cohort, version: str | None = None) -> DatasetSnapshot:
    """Precompute per-attribute stats and default-order curves once.

    The version tag is a content digest of the cohort summary, so the
    same dataset always publishes the same tag.
    """
    if not cohort.attributes:
        raise ValidationError(
            "cohort declares no group attributes; nothing to serve"
        )
    stats = {attr: stats_by_group(cohort, attr) for attr in cohort.attributes}
    curves = {attr: build_curves(cohort, attr) for attr in cohort.attributes}
    if version is None:
        digest = hashlib.blake2b(
            json.dumps(cohort.summary, sort_keys=True).encode(), digest_size=8
        ).hexdigest()
        version = f"v-{digest}"
    return DatasetSnapshot(
        cohort=cohort, version=version, stats=stats, curves=curves
    )


def _json_response(payload, status_code: int = 200) -> Response:
    return Response(
        content=to_json_bytes(payload),
        status_code=status_code,
        media_type="application/json",
    )


def _int_param(raw: str | None, name: str, default: int | None = None) -> int:
    if raw is None:
        if default is None:
            raise ValidationError(f"missing required parameter {name!r}")
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ValidationError(f"parameter {name!r} must be an integer, got {raw!r}") from exc


def _seed_param(raw: str | None) -> int | None:
    return None if raw is None else _int_param(raw, "seed")


def _require_attribute(snapshot: DatasetSnapshot, attribute: str | None) -> str:
    if attribute is None:
        raise ValidationError("missing required parameter 'attribute'")
    if attribute not in snapshot.cohort.attributes:
        raise ValidationError(f"unknown attribute {attribute!r}")
    return attribute


def _curve_points(
    snapshot: DatasetSnapshot,
    attribute: str,
    kmin: int,
    kmax: int,
    stride: int,
    tie_break: str,
    seed: int | None,
) -> list[dict]:
    """Overall precision and per-group recall of the global top-K, for
    K from kmin to kmax inclusive."""
    cohort = snapshot.cohort
    n = len(cohort)
    if not 0 <= kmin <= kmax:
        raise ValidationError(f"need 0 <= kmin <= kmax, got {kmin}..{kmax}")
    if kmax > n:
        raise ValidationError(f"kmax {kmax} exceeds cohort size {n}")
    if stride < 1:
        raise ValidationError(f"stride must be >= 1, got {stride}")
    if (kmax - kmin) // stride + 1 > MAX_CURVE_POINTS:
        raise ValidationError(
            f"more than {MAX_CURVE_POINTS} points requested; raise stride"
        )

    order = global_order(cohort, tie_break, seed)
    cols = cohort._columns
    labels = cols["labels"][order]
    codes, cats = cols["attrs"][attribute]
    codes = codes[order]
    cum_overall = np.cumsum(labels)
    cum_by_group = {
        cat: np.cumsum(labels * (codes == idx)) for idx, cat in enumerate(cats)
    }
    group_stats = snapshot.stats[attribute]

    points = []
    for k in range(kmin, kmax + 1, stride):
        precision = float(cum_overall[k - 1] / k) if k else None
        recalls = {}
        for cat in cats:
            y = group_stats[cat].positives
            if y == 0:
                recalls[cat] = None
            else:
                tp = int(cum_by_group[cat][k - 1]) if k else 0
                recalls[cat] = tp / y
        points.append({"k": k, "overall_precision": precision, "recalls": recalls})
    return points


def create_app(snapshot: DatasetSnapshot, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="equiselect", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["GET", "POST"],
        allow_headers=["*"],
    )

    @app.exception_handler(BalanceError)
    async def _balance_error(request: Request, exc: BalanceError):
        return _json_response({"error": str(exc)}, 422)

    @app.exception_handler(ValidationError)
    async def _validation_error(request: Request, exc: ValidationError):
        return _json_response({"error": str(exc)}, 400)

    @app.exception_handler(DataError)
    async def _data_error(request: Request, exc: DataError):
        return _json_response({"error": str(exc)}, 400)

    @app.get("/api/dataset")
    def dataset():
        payload = {
            "version": snapshot.version,
            "rows": len(snapshot.cohort),
            "attributes": list(snapshot.cohort.attributes),
            "groups": {
                attr: [
                    {
                        "group": s.group,
                        "n": s.n,
                        "positives": s.positives,
                        "prevalence": s.prevalence,
                    }
                    for s in sorted(by_group.values(), key=lambda s: s.group)
                ]
                for attr, by_group in snapshot.stats.items()
            },
        }
        return _json_response(payload)

    @app.get("/api/audit")
    def audit(
        attribute: str | None = None,
        k: str | None = None,
        reference: str | None = None,
        tie_break: str = BY_ENTITY_ID,
        seed: str | None = None,
    ):
        attr = _require_attribute(snapshot, attribute)
        report = audit_top_k(
            snapshot.cohort,
            attr,
            _int_param(k, "k"),
            reference,
            tie_break,
            _seed_param(seed),
        )
        return _json_response(report.to_payload())

    @app.post("/api/balance")
    async def balance(request: Request):
        try:
            body = await request.json()
        except json.JSONDecodeError as exc:
            raise ValidationError(f"request body must be JSON: {exc}") from exc
        if not isinstance(body, dict):
            raise ValidationError("request body must be a JSON object")
        attr = _require_attribute(snapshot, body.pop("attribute", None))
        spec = BalanceSpec.from_payload(body)
        outcome = run_balance_with_audit(snapshot.cohort, attr, spec)
        return _json_response(outcome.to_payload())

    @app.get("/api/tradeoff")
    def tradeoff(
        attribute: str | None = None,
        k: str | None = None,
        reference: str | None = None,
        tie_break: str = BY_ENTITY_ID,
        seed: str | None = None,
    ):
        attr = _require_attribute(snapshot, attribute)
        menu = build_tradeoff_menu(
            snapshot.cohort,
            attr,
            _int_param(k, "k"),
            reference,
            tie_break,
            _seed_param(seed),
        )
        return _json_response(menu.to_payload())

    @app.get("/api/curve")
    def curve(
        attribute: str | None = None,
        kmin: str | None = None,
        kmax: str | None = None,
        stride: str | None = None,
        tie_break: str = BY_ENTITY_ID,
        seed: str | None = None,
    ):
        attr = _require_attribute(snapshot, attribute)
        kmin_v = _int_param(kmin, "kmin", 0)
        kmax_v = _int_param(kmax, "kmax")
        stride_v = _int_param(stride, "stride", 1)
        seed_v = _seed_param(seed)
        points = _curve_points(
            snapshot, attr, kmin_v, kmax_v, stride_v, tie_break, seed_v
        )
        payload = {
            "attribute": attr,
            "kmin": kmin_v,
            "kmax": kmax_v,
            "stride": stride_v,
            "tie_break": tie_break,
            "seed": seed_v,
            "points": points,
        }
        return _json_response(payload)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
