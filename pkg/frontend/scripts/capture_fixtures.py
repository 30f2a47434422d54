"""Regenerate the UI test fixtures from the live HTTP API.

Each fixture file is the verbatim response body of one API request
against the benchmark cohort used across the test suite, so the UI
tests assert against exactly what the server would send. Rerun after
any change to the API payloads:

    python3 frontend/scripts/capture_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

from equiselect.balancer import BalanceSpec, Constraint
from equiselect.reporting import build_tradeoff_menu, render, run_balance_with_audit
from equiselect.server import build_snapshot, create_app

REPO = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(REPO / "tests"))

import desk_scale  # noqa: E402  (needs the tests/ dir on sys.path)

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

K = desk_scale.K
ATTRIBUTE = desk_scale.ATTRIBUTE


def main() -> None:
    client = TestClient(create_app(build_snapshot(desk_scale.cohort())))
    captures = {
        "dataset.json": client.get("/api/dataset"),
        "audit_k150.json": client.get(
            "/api/audit", params={"attribute": ATTRIBUTE, "k": K}
        ),
        "tradeoff_k150.json": client.get(
            "/api/tradeoff", params={"attribute": ATTRIBUTE, "k": K}
        ),
        "balance_equalized_k150.json": client.post(
            "/api/balance",
            json={"attribute": ATTRIBUTE, "mode": "equalized", "k": K},
        ),
        "balance_proportional_k150.json": client.post(
            "/api/balance",
            json={
                "attribute": ATTRIBUTE,
                "mode": "proportional",
                "k": K,
                "reference_group": "a",
                "search_strategy": "merged_prefix",
            },
        ),
        "balance_proportional_k150_ref_c.json": client.post(
            "/api/balance",
            json={
                "attribute": ATTRIBUTE,
                "mode": "proportional",
                "k": K,
                "reference_group": "c",
                "search_strategy": "merged_prefix",
            },
        ),
        "tradeoff_k150_ref_c.json": client.get(
            "/api/tradeoff",
            params={"attribute": ATTRIBUTE, "k": K, "reference": "c"},
        ),
    }
    FIXTURES.mkdir(parents=True, exist_ok=True)
    for name, response in captures.items():
        if response.status_code != 200:
            raise SystemExit(f"{name}: HTTP {response.status_code}: {response.text}")
        (FIXTURES / name).write_bytes(response.content)
        size = len(response.content)
        print(f"wrote {name} ({size} bytes)")

    # Plot-data renderings of the same objects, as the CLI would emit
    # them; the chart-input tests assert structural identity with these.
    cohort = desk_scale.cohort()
    menu_obj = build_tradeoff_menu(cohort, ATTRIBUTE, K)
    outcome = run_balance_with_audit(
        cohort,
        ATTRIBUTE,
        BalanceSpec(mode="equalized", constraint=Constraint("list_size", K)),
    )
    for name, obj in (
        ("tradeoff_k150_plotdata.csv", menu_obj),
        ("balance_equalized_k150_plotdata.csv", outcome),
    ):
        data = render(obj, "plotdata")
        (FIXTURES / name).write_bytes(data)
        print(f"wrote {name} ({len(data)} bytes)")

    # Sanity echo of the numbers the UI tests hinge on.
    menu = json.loads((FIXTURES / "tradeoff_k150.json").read_text())
    for s in menu["scenarios"]:
        print(
            f"  {s['label']}: total={s['total']} precision={s['overall_precision']}"
            f" delta={s['precision_delta_vs_unadjusted']}"
        )


if __name__ == "__main__":
    main()
