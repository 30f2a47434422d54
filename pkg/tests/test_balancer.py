"""Recall balancer: curves, the four quota modes, trim, realize."""

import random

import numpy as np
import pytest

import oracles as O
from equiselect.balancer import (
    BalanceSpec,
    Constraint,
    balance_equalized_by_recall,
    balance_equalized_by_size,
    balance_proportional_by_ref_recall,
    balance_proportional_by_size,
    build_curves,
    merge_curves,
    proportional_prefix_by_size,
    realize_selection,
    rolling_recall_curve,
    run_balance,
    trim_trailing_negatives,
)
from equiselect.cohort import cohort_from_rows, partition_by_group
from equiselect.errors import BalanceError, ValidationError

TWO_GROUPS = [
    ("a1", 0.9, 1, "a"), ("a2", 0.8, 0, "a"), ("a3", 0.7, 1, "a"), ("a4", 0.6, 0, "a"),
    ("b1", 0.95, 1, "b"), ("b2", 0.5, 1, "b"), ("b3", 0.4, 0, "b"), ("b4", 0.3, 0, "b"),
]
# a/c pair where c leads with a negative, for proportional and trim cases
AC_ROWS = [r for r in TWO_GROUPS if r[3] == "a"] + [
    ("c1", 0.99, 0, "c"), ("c2", 0.2, 1, "c"),
]


@pytest.fixture()
def two_group_curves():
    return build_curves(cohort_from_rows(TWO_GROUPS, attribute="g"), "g")


@pytest.fixture()
def ac_curves():
    return build_curves(cohort_from_rows(AC_ROWS, attribute="g"), "g")


class TestCurves:
    def test_cumulative_recall_sequence(self, two_group_curves):
        a = two_group_curves["a"]
        assert list(a.cum_positives) == [1, 1, 2, 2]
        assert list(a.rolling_recall) == [0.5, 0.5, 1.0, 1.0]
        assert a.ordered_entity_ids == ("a1", "a2", "a3", "a4")
        assert [e.n for e in a.entries] == [1, 2, 3, 4]
        assert a.recall_at(0) == 0.0
        assert a.recall_at(2) == 0.5

    def test_zero_positive_group_has_flat_zero_curve(self):
        curve = rolling_recall_curve(
            partition_by_group(
                cohort_from_rows([("z1", 0.4, 0, "z"), ("z2", 0.1, 0, "z")],
                                 attribute="g"),
                "g",
            )["z"]
        )
        assert list(curve.rolling_recall) == [0.0, 0.0]
        assert curve.stats.positives == 0

    def test_score_ties_fall_back_to_entity_id(self):
        rows = [("p2", 0.5, 0, "g"), ("p1", 0.5, 1, "g"), ("p3", 0.9, 0, "g")]
        curve = rolling_recall_curve(
            partition_by_group(cohort_from_rows(rows, attribute="x"), "x")["g"]
        )
        assert curve.ordered_entity_ids == ("p3", "p1", "p2")

    def test_list_and_cohort_paths_agree(self):
        rng = random.Random(41)
        for trial in range(40):
            inst = O.random_instance(rng, force_ties=trial % 2 == 0)
            rows = [(e, s, l, g) for g, rs in inst.items() for e, s, l in rs]
            cohort = cohort_from_rows(rows, attribute="g")
            vec = build_curves(cohort, "g", "seeded_random", seed=5)
            for g, exs in partition_by_group(cohort, "g").items():
                lst = rolling_recall_curve(exs, "seeded_random", seed=5, group=g)
                assert lst.ordered_entity_ids == vec[g].ordered_entity_ids

    def test_empty_group_rejected(self):
        with pytest.raises(ValidationError):
            rolling_recall_curve([])


class TestEqualizedByRecall:
    def test_half_recall_quotas(self, two_group_curves):
        plan = balance_equalized_by_recall(two_group_curves, 0.5)
        assert plan.quota_map == {"a": 2, "b": 1}
        assert plan.total == 3
        assert [q.achieved_recall for q in plan.quotas] == [0.5, 0.5]

    def test_full_recall_takes_everyone(self, two_group_curves):
        assert balance_equalized_by_recall(two_group_curves, 1.0).quota_map == {
            "a": 4, "b": 4,
        }

    def test_zero_target_keeps_leading_negatives(self, ac_curves):
        plan = balance_equalized_by_recall(ac_curves, 0.0)
        assert plan.quota_map == {"a": 0, "c": 1}
        assert plan.quota("c").achieved_recall == 0.0

    def test_zero_positive_group_forced_empty_with_warning(self):
        rows = TWO_GROUPS + [("z1", 0.99, 0, "z")]
        curves = build_curves(cohort_from_rows(rows, attribute="g"), "g")
        plan = balance_equalized_by_recall(curves, 0.5)
        assert plan.quota_map["z"] == 0
        assert any("'z'" in w for w in plan.warnings)

    def test_target_outside_unit_interval_rejected(self, two_group_curves):
        with pytest.raises(ValidationError):
            balance_equalized_by_recall(two_group_curves, 1.5)

    def test_matches_reference_scan(self):
        rng = random.Random(42)
        for trial in range(150):
            inst = O.random_instance(rng, force_ties=trial % 2 == 0)
            rows = [(e, s, l, g) for g, rs in inst.items() for e, s, l in rs]
            curves = build_curves(cohort_from_rows(rows, attribute="g"), "g")
            ocurves = {g: O.curve_of(rs) for g, rs in inst.items()}
            for t in (0.0, 0.25, 0.5, 1.0, round(rng.random(), 3)):
                got = balance_equalized_by_recall(curves, t).quota_map
                assert got == O.equalized_by_recall(ocurves, t)


class TestEqualizedBySize:
    def test_budget_three(self, two_group_curves):
        plan = balance_equalized_by_size(two_group_curves, 3)
        assert plan.quota_map == {"a": 2, "b": 1}
        assert plan.total == 3
        assert plan.requested_k == 3
        assert plan.diagnostics["frontier_rolling_recall"] == 0.5

    def test_merged_order_breaks_ties_by_positives_then_name(self, two_group_curves):
        merged = merge_curves(two_group_curves)
        head = [(m.group, m.n, m.m) for m in merged[:4]]
        # a and b tie at every recall level; a has equal positives so name wins
        assert head == [("a", 1, 1), ("b", 1, 2), ("a", 2, 3), ("b", 2, 4)]

    def test_quota_is_prefix_depth(self, two_group_curves):
        for size in range(0, 9):
            plan = balance_equalized_by_size(two_group_curves, size)
            assert plan.total == size
            merged = merge_curves(two_group_curves)[:size]
            for q in plan.quotas:
                depth = max((m.n for m in merged if m.group == q.group), default=0)
                assert q.k == depth

    def test_zero_positive_entries_merge_literally(self, ac_curves):
        # c's leading negative sits at recall 0, ahead of every positive
        assert balance_equalized_by_size(ac_curves, 1).quota_map == {"a": 0, "c": 1}

    def test_explicit_group_tie_order(self, two_group_curves):
        plan = balance_equalized_by_size(two_group_curves, 1, group_tie_order=["b", "a"])
        assert plan.quota_map == {"a": 0, "b": 1}

    def test_budget_bounds(self, two_group_curves):
        with pytest.raises(ValidationError):
            balance_equalized_by_size(two_group_curves, 9)
        with pytest.raises(ValidationError):
            balance_equalized_by_size(two_group_curves, -1)

    def test_matches_reference_enumeration(self):
        rng = random.Random(43)
        for trial in range(150):
            inst = O.random_instance(rng, force_ties=trial % 2 == 0)
            rows = [(e, s, l, g) for g, rs in inst.items() for e, s, l in rs]
            curves = build_curves(cohort_from_rows(rows, attribute="g"), "g")
            ocurves = {g: O.curve_of(rs) for g, rs in inst.items()}
            n = len(rows)
            for size in {0, 1, n // 3, n // 2, n}:
                got = balance_equalized_by_size(curves, size).quota_map
                assert got == O.equalized_by_size(ocurves, size)


class TestProportionalByRefRecall:
    def test_equal_prevalence_mirrors_reference(self, ac_curves):
        plan = balance_proportional_by_ref_recall(ac_curves, "a", 1.0)
        assert plan.quota_map == {"a": 4, "c": 2}
        assert plan.quota("c").r_g == 1.0
        assert plan.reference_group == "a"

    def test_ratio_scales_target(self):
        # c: 4 rows 1 positive -> half of a's prevalence
        rows = [r for r in TWO_GROUPS if r[3] == "a"] + [
            ("c1", 0.9, 1, "c"), ("c2", 0.7, 0, "c"),
            ("c3", 0.5, 0, "c"), ("c4", 0.3, 0, "c"),
        ]
        curves = build_curves(cohort_from_rows(rows, attribute="g"), "g")
        plan = balance_proportional_by_ref_recall(curves, "a", 1.0)
        assert plan.quota("c").r_g == 0.5
        assert plan.quota("c").target_recall == 0.5
        # c's only positive is first: recall jumps to 1 > 0.5, so k stays 0
        assert plan.quota_map == {"a": 4, "c": 0}

    def test_target_capped_at_one(self):
        rows = [
            ("a1", 0.9, 1, "a"), ("a2", 0.5, 1, "a"),
            ("b1", 0.8, 1, "b"), ("b2", 0.6, 1, "b"), ("b3", 0.4, 0, "b"), ("b4", 0.2, 0, "b"),
        ]
        curves = build_curves(cohort_from_rows(rows, attribute="g"), "g")
        plan = balance_proportional_by_ref_recall(curves, "b", 0.9)
        assert plan.quota("a").target_recall == 1.0
        assert plan.diagnostics["targets_capped_at_1"] == ["a"]

    def test_zero_prevalence_reference_rejected(self, ac_curves):
        rows = AC_ROWS + [("z1", 0.5, 0, "z")]
        curves = build_curves(cohort_from_rows(rows, attribute="g"), "g")
        with pytest.raises(BalanceError):
            balance_proportional_by_ref_recall(curves, "z", 0.5)

    def test_unknown_reference_rejected(self, ac_curves):
        with pytest.raises(ValidationError):
            balance_proportional_by_ref_recall(ac_curves, "nope", 0.5)

    def test_matches_reference_scan(self):
        rng = random.Random(44)
        for trial in range(150):
            inst = O.random_instance(rng, force_ties=trial % 2 == 0)
            ocurves = {g: O.curve_of(rs) for g, rs in inst.items()}
            with_pos = [g for g in inst if O.positives_of(ocurves[g]) > 0]
            if not with_pos:
                continue
            ref = rng.choice(with_pos)
            rows = [(e, s, l, g) for g, rs in inst.items() for e, s, l in rs]
            curves = build_curves(cohort_from_rows(rows, attribute="g"), "g")
            for t in (0.0, 0.5, 1.0, round(rng.random(), 3)):
                got = balance_proportional_by_ref_recall(curves, ref, t).quota_map
                assert got == O.proportional_by_ref_recall(ocurves, ref, t)


class TestProportionalBySize:
    def test_fixed_step_walks_reference_recall(self, ac_curves):
        plan = balance_proportional_by_size(ac_curves, "a", 5, step_size=0.05)
        assert plan.quota_map == {"a": 4, "c": 2}
        assert plan.total == 6  # overshoot is allowed and reported
        assert plan.requested_k == 5
        assert plan.diagnostics["x_final"] == 1.0
        assert plan.diagnostics["steps_taken"] == 10
        assert plan.diagnostics["k_all"] == 6

    def test_search_path_is_monotone(self, ac_curves):
        plan = balance_proportional_by_size(ac_curves, "a", 5, step_size=0.05)
        path = plan.diagnostics["search_path"]
        xs = [p["x"] for p in path]
        ks = [p["k_all"] for p in path]
        assert xs == sorted(xs)
        assert ks == sorted(ks)

    def test_exact_breakpoint_reports_undershoot(self, ac_curves):
        plan = balance_proportional_by_size(
            ac_curves, "a", 5, search_strategy="exact_breakpoint"
        )
        assert plan.quota_map == {"a": 4, "c": 2}
        assert plan.diagnostics["x_final"] == 1.0
        assert plan.diagnostics["undershoot"] == {
            "x": 0.5, "total": 3, "quotas": {"a": 2, "c": 1},
        }
        assert plan.step_size is None

    def test_exact_never_right_of_fixed(self):
        rng = random.Random(45)
        for trial in range(60):
            inst = O.random_instance(rng, force_ties=trial % 2 == 0)
            ocurves = {g: O.curve_of(rs) for g, rs in inst.items()}
            with_pos = [g for g in inst if O.positives_of(ocurves[g]) > 0]
            if not with_pos:
                continue
            ref = rng.choice(with_pos)
            rows = [(e, s, l, g) for g, rs in inst.items() for e, s, l in rs]
            curves = build_curves(cohort_from_rows(rows, attribute="g"), "g")
            reachable = sum(len(inst[g]) for g in with_pos)
            size = rng.randint(1, reachable)
            fixed = balance_proportional_by_size(curves, ref, size, step_size=0.01)
            exact = balance_proportional_by_size(
                curves, ref, size, search_strategy="exact_breakpoint"
            )
            assert exact.diagnostics["x_final"] <= fixed.diagnostics["x_final"]
            assert exact.total >= size
            assert fixed.total >= exact.total

    def test_zero_budget_selects_nothing(self, ac_curves):
        plan = balance_proportional_by_size(ac_curves, "a", 0)
        assert plan.quota_map == {"a": 0, "c": 0}
        assert plan.diagnostics == {"k_all": 0}

    def test_budget_beyond_reachable_groups_rejected(self):
        rows = AC_ROWS + [("z1", 0.5, 0, "z")]
        curves = build_curves(cohort_from_rows(rows, attribute="g"), "g")
        plan = balance_proportional_by_size(curves, "a", 6)
        assert plan.quota_map["z"] == 0
        with pytest.raises(BalanceError):
            balance_proportional_by_size(curves, "a", 7)

    def test_matches_reference_walk(self):
        rng = random.Random(46)
        for trial in range(100):
            inst = O.random_instance(rng, force_ties=trial % 2 == 0)
            ocurves = {g: O.curve_of(rs) for g, rs in inst.items()}
            with_pos = [g for g in inst if O.positives_of(ocurves[g]) > 0]
            if not with_pos:
                continue
            ref = rng.choice(with_pos)
            rows = [(e, s, l, g) for g, rs in inst.items() for e, s, l in rs]
            curves = build_curves(cohort_from_rows(rows, attribute="g"), "g")
            reachable = sum(len(inst[g]) for g in with_pos)
            for size in {0, 1, reachable // 2, reachable}:
                for step in (0.05, 0.25):
                    want, _ = O.proportional_by_size(ocurves, ref, size, step)
                    got = balance_proportional_by_size(
                        curves, ref, size, step_size=step
                    ).quota_map
                    assert got == want


class TestProportionalPrefix:
    def test_lands_on_budget_exactly(self, ac_curves):
        plan = proportional_prefix_by_size(ac_curves, "a", 5)
        assert plan.quota_map == {"a": 3, "c": 2}
        assert plan.total == 5
        assert plan.search_strategy == "merged_prefix"

    def test_total_always_exact(self):
        rng = random.Random(47)
        for trial in range(80):
            inst = O.random_instance(rng, force_ties=trial % 2 == 0)
            ocurves = {g: O.curve_of(rs) for g, rs in inst.items()}
            with_pos = [g for g in inst if O.positives_of(ocurves[g]) > 0]
            if not with_pos:
                continue
            ref = rng.choice(with_pos)
            rows = [(e, s, l, g) for g, rs in inst.items() for e, s, l in rs]
            curves = build_curves(cohort_from_rows(rows, attribute="g"), "g")
            reachable = sum(len(inst[g]) for g in with_pos)
            for size in {0, 1, reachable // 2, reachable}:
                plan = proportional_prefix_by_size(curves, ref, size)
                assert plan.total == size
                # never deeper than the breakpoint search at the same budget
                wide = balance_proportional_by_size(
                    curves, ref, size, search_strategy="exact_breakpoint"
                )
                for q in plan.quotas:
                    assert q.k <= wide.quota(q.group).k


class TestTrim:
    def test_trailing_negatives_dropped(self, two_group_curves):
        plan = balance_equalized_by_recall(two_group_curves, 0.5)
        trimmed = trim_trailing_negatives(plan, two_group_curves)
        assert trimmed.quota_map == {"a": 1, "b": 1}
        assert trimmed.diagnostics["pre_trim_total"] == 3
        assert trimmed.diagnostics["trimmed"] is True
        for q, t in zip(plan.quotas, trimmed.quotas):
            assert t.achieved_recall == q.achieved_recall

    def test_recall_zero_prefix_trims_to_empty(self, ac_curves):
        plan = balance_equalized_by_recall(ac_curves, 0.0)
        trimmed = trim_trailing_negatives(plan, ac_curves)
        assert trimmed.quota_map == {"a": 0, "c": 0}

    def test_idempotent(self, two_group_curves):
        plan = balance_equalized_by_size(two_group_curves, 6)
        once = trim_trailing_negatives(plan, two_group_curves)
        twice = trim_trailing_negatives(once, two_group_curves)
        assert once.quota_map == twice.quota_map


class TestRealize:
    def test_ids_follow_group_rank_order(self, two_group_curves):
        cohort = cohort_from_rows(TWO_GROUPS, attribute="g")
        plan = balance_equalized_by_recall(two_group_curves, 0.5)
        assert realize_selection(plan, cohort, "g") == ["a1", "a2", "b1"]

    def test_group_mismatch_rejected(self, two_group_curves):
        plan = balance_equalized_by_recall(two_group_curves, 0.5)
        other = cohort_from_rows(AC_ROWS, attribute="g")
        with pytest.raises(ValidationError):
            realize_selection(plan, other, "g")

    def test_permutation_invariant(self):
        rng = random.Random(48)
        rows = list(TWO_GROUPS)
        cohort = cohort_from_rows(rows, attribute="g")
        plan = balance_equalized_by_size(build_curves(cohort, "g"), 5)
        want = realize_selection(plan, cohort, "g")
        for _ in range(5):
            rng.shuffle(rows)
            assert realize_selection(plan, cohort_from_rows(rows, attribute="g"), "g") == want


class TestSpecAndDispatch:
    def test_payload_round_trip(self):
        spec = BalanceSpec.from_payload(
            {"mode": "proportional", "k": 5, "reference_group": "a",
             "options": {"step_size": 0.05, "trim": False}}
        )
        assert spec.constraint == Constraint("list_size", 5)
        assert spec.step_size == 0.05
        cohort = cohort_from_rows(AC_ROWS, attribute="g")
        plan = run_balance(cohort, "g", spec)
        assert plan.quota_map == {"a": 4, "c": 2}
        payload = plan.to_payload()
        assert payload["requested_K"] == 5
        assert payload["total"] == 6
        assert [g["group"] for g in payload["groups"]] == ["a", "c"]

    def test_shorthand_and_object_constraints_agree(self):
        a = BalanceSpec.from_payload({"mode": "equalized", "recall": 0.5})
        b = BalanceSpec.from_payload(
            {"mode": "equalized",
             "constraint": {"kind": "recall_target", "value": 0.5}}
        )
        assert a == b

    @pytest.mark.parametrize(
        "payload",
        [
            {"mode": "equalized"},
            {"mode": "equalized", "recall": 0.5, "k": 3},
            {"mode": "equalized", "ref_recall": 0.5},
            {"mode": "proportional", "recall": 0.5, "reference_group": "a"},
            {"mode": "proportional", "k": 3},
            {"mode": "equalized", "recall": 0.5, "reference_group": "a"},
            {"mode": "sideways", "recall": 0.5},
            {"mode": "equalized", "recall": 0.5, "bogus": 1},
            {"mode": "equalized", "recall": 0.5, "tie_break": "coin_flip"},
        ],
    )
    def test_invalid_requests_rejected(self, payload):
        with pytest.raises(ValidationError):
            BalanceSpec.from_payload(payload)

    def test_dispatch_covers_every_branch(self):
        cohort = cohort_from_rows(AC_ROWS, attribute="g")
        cases = [
            ({"mode": "equalized", "recall": 0.5}, "recall_target"),
            ({"mode": "equalized", "k": 3}, "list_size"),
            ({"mode": "proportional", "ref_recall": 1.0,
              "reference_group": "a"}, "reference_recall"),
            ({"mode": "proportional", "k": 5, "reference_group": "a"},
             "list_size"),
            ({"mode": "proportional", "k": 5, "reference_group": "a",
              "search_strategy": "merged_prefix"}, "list_size"),
        ]
        for payload, kind in cases:
            plan = run_balance(cohort, "g", BalanceSpec.from_payload(payload))
            assert plan.constraint.kind == kind

    def test_trim_option_applies(self):
        cohort = cohort_from_rows(TWO_GROUPS, attribute="g")
        plan = run_balance(
            cohort, "g",
            BalanceSpec.from_payload({"mode": "equalized", "recall": 0.5,
                                      "trim": True}),
        )
        assert plan.quota_map == {"a": 1, "b": 1}

    def test_seeded_plan_records_tie_settings(self):
        cohort = cohort_from_rows(TWO_GROUPS, attribute="g")
        spec = BalanceSpec.from_payload(
            {"mode": "equalized", "k": 4, "tie_break": "seeded_random",
             "seed": 9}
        )
        plan = run_balance(cohort, "g", spec)
        assert plan.tie_break == "seeded_random"
        assert plan.seed == 9
        assert plan.to_payload()["seed"] == 9

    def test_mixed_tie_rules_rejected(self):
        cohort = cohort_from_rows(TWO_GROUPS, attribute="g")
        mixed = build_curves(cohort, "g")
        mixed["b"] = build_curves(cohort, "g", "seeded_random", 1)["b"]
        with pytest.raises(ValidationError):
            balance_equalized_by_recall(mixed, 0.5)
