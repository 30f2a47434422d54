"""Decision framework: context validation, rule lookup, caveats."""

import pytest

from equiselect.errors import ValidationError
from equiselect.fairness_tree import (
    FairnessContext,
    recommend_metric,
    rule_table,
    valid_contexts,
)

EXPECTED = {
    ("punitive", None, "everyone"): "FP/GS parity",
    ("punitive", None, "intervened_or_served"): "FDR parity",
    ("punitive", None, "actual_need_or_unwarranted"): "FPR parity",
    ("assistive", "small_fraction_of_need", "everyone"): "recall parity",
    ("assistive", "small_fraction_of_need", "intervened_or_served"): "recall parity",
    ("assistive", "small_fraction_of_need", "not_intervened_or_unserved"): "recall parity",
    ("assistive", "small_fraction_of_need", "actual_need_or_unwarranted"): "recall parity",
    ("assistive", "substantial", "everyone"): "FN/GS parity",
    ("assistive", "substantial", "not_intervened_or_unserved"): "FOR parity",
    ("assistive", "substantial", "actual_need_or_unwarranted"): "FNR parity",
}


class TestMapping:
    def test_every_valid_context_is_mapped(self):
        contexts = valid_contexts()
        assert len(contexts) == 10
        seen = {}
        for ctx in contexts:
            rec = recommend_metric(ctx)
            seen[(ctx.nature, ctx.scale, ctx.focus)] = rec.metric
            assert rec.metric in rule_table()["metrics"]
            assert rec.rationale
        assert seen == EXPECTED
        assert set(seen.values()) == set(rule_table()["metrics"])

    def test_small_assistive_ignores_focus(self):
        recs = [
            recommend_metric(
                FairnessContext(nature="assistive",
                                scale="small_fraction_of_need", focus=f)
            )
            for f in ("everyone", "intervened_or_served",
                      "not_intervened_or_unserved", "actual_need_or_unwarranted")
        ]
        assert {r.metric for r in recs} == {"recall parity"}
        assert {r.metric_key for r in recs} == {"recall"}

    def test_recall_recommendation_explains_fnr_equivalence(self):
        rec = recommend_metric(
            FairnessContext(nature="assistive",
                            scale="small_fraction_of_need", focus="everyone")
        )
        text = " ".join(rec.caveats).lower()
        assert "close to 1" in text
        assert "fnr" in text and "1 minus recall" in text

    def test_metric_keys_match_rate_family(self):
        from equiselect.metrics import RATE_NAMES

        for ctx in valid_contexts():
            key = recommend_metric(ctx).metric_key
            assert key in RATE_NAMES or key == "for"


class TestValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(nature="assistive", focus="everyone"),  # missing scale
            dict(nature="punitive", focus="everyone", scale="substantial"),
            dict(nature="punitive", focus="not_intervened_or_unserved"),
            dict(nature="assistive", scale="substantial",
                 focus="intervened_or_served"),
            dict(nature="restorative", focus="everyone"),
            dict(nature="punitive", focus="shareholders"),
            dict(nature="assistive", scale="medium", focus="everyone"),
        ],
    )
    def test_ill_formed_contexts_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            FairnessContext(**kwargs)

    def test_payload_round_trip(self):
        ctx = FairnessContext.from_payload(
            {"nature": "assistive", "scale": "substantial",
             "focus": "everyone"}
        )
        assert ctx.to_payload() == {
            "nature": "assistive", "scale": "substantial", "focus": "everyone",
        }
        with pytest.raises(ValidationError):
            FairnessContext.from_payload({"nature": "punitive"})
        with pytest.raises(ValidationError):
            FairnessContext.from_payload(
                {"nature": "punitive", "focus": "everyone", "extra": 1}
            )

    def test_bad_selection_fraction_rejected(self):
        ctx = FairnessContext(nature="punitive", focus="everyone")
        with pytest.raises(ValidationError):
            recommend_metric(ctx, selection_fraction=1.5)


class TestCaveats:
    def test_small_fraction_attaches_degeneracy_hints(self):
        fnr_ctx = FairnessContext(
            nature="assistive", scale="substantial",
            focus="actual_need_or_unwarranted",
        )
        plain = recommend_metric(fnr_ctx)
        hinted = recommend_metric(fnr_ctx, selection_fraction=0.003)
        assert len(hinted.caveats) == len(plain.caveats) + 1
        assert "0.3%" in " ".join(hinted.caveats)

        for_ctx = FairnessContext(
            nature="assistive", scale="substantial",
            focus="not_intervened_or_unserved",
        )
        hinted_for = recommend_metric(for_ctx, selection_fraction=0.01)
        assert any("prevalence" in c for c in hinted_for.caveats)

    def test_large_fraction_attaches_nothing_extra(self):
        ctx = FairnessContext(
            nature="assistive", scale="substantial",
            focus="actual_need_or_unwarranted",
        )
        assert recommend_metric(ctx, selection_fraction=0.4).caveats == \
            recommend_metric(ctx).caveats

    def test_tradeoff_caveat_always_present(self):
        for ctx in valid_contexts():
            rec = recommend_metric(ctx)
            assert any("several metrics" in c for c in rec.caveats)

    def test_payload_shape(self):
        rec = recommend_metric(FairnessContext(nature="punitive",
                                               focus="everyone"))
        payload = rec.to_payload()
        assert set(payload) == {
            "metric", "metric_key", "rationale", "caveats", "context",
        }
        assert payload["context"]["nature"] == "punitive"
