"""Backtesting harness: splits, per-split precision, model selection."""

import datetime as dt
import random
from pathlib import Path

import pytest

import oracles as O
from equiselect.cohort import IngestConfig, cohort_from_rows, parse_score_file
from equiselect.cohort import ScoredExample
from equiselect.errors import DataError, ValidationError
from equiselect.temporal import (
    SelectionRule,
    SplitEvaluation,
    TemporalConfig,
    TemporalSplit,
    add_months,
    evaluate_split,
    generate_splits,
    run_temporal_eval,
    select_model,
)

FIXTURE = Path(__file__).parent / "fixtures" / "temporal_two_models.csv"

JAN = dt.date(2012, 1, 1)


def _split(date, months=6):
    return TemporalSplit(modeling_date=date, window_end=add_months(date, months))


def _scores(n, positives_in_top, k=150, date=JAN, model="m"):
    out = []
    for i in range(n):
        label = 1 if i < positives_in_top and i < k else 0
        out.append(
            ScoredExample(
                entity_id=f"e{i:04d}", score=(n - i) / n, label=label,
                as_of_date=date, model_id=model,
            )
        )
    return out


class TestCalendar:
    def test_month_stepping_clamps_short_months(self):
        assert add_months(dt.date(2012, 1, 31), 1) == dt.date(2012, 2, 29)
        assert add_months(dt.date(2013, 1, 31), 1) == dt.date(2013, 2, 28)
        assert add_months(dt.date(2012, 1, 1), 6) == dt.date(2012, 7, 1)
        assert add_months(dt.date(2012, 10, 31), 4) == dt.date(2013, 2, 28)
        assert add_months(dt.date(2012, 3, 15), -1) == dt.date(2012, 2, 15)

    def test_six_month_intervals_over_five_years(self):
        cfg = TemporalConfig(
            start_date=JAN, end_date=dt.date(2017, 1, 1),
            interval_months=6, label_window_months=6, k=150,
        )
        splits = generate_splits(cfg)
        assert len(splits) == 11
        assert splits[0].modeling_date == JAN
        assert splits[1].modeling_date == dt.date(2012, 7, 1)
        assert splits[-1].modeling_date == dt.date(2017, 1, 1)
        for s in splits:
            assert s.window_start == s.modeling_date
            assert s.window_end == add_months(s.modeling_date, 6)

    def test_degenerate_and_coarse_ranges(self):
        one = generate_splits(
            TemporalConfig(start_date=JAN, end_date=JAN,
                           interval_months=6, label_window_months=6, k=10)
        )
        assert len(one) == 1
        three = generate_splits(
            TemporalConfig(start_date=JAN, end_date=dt.date(2014, 1, 1),
                           interval_months=12, label_window_months=12, k=10)
        )
        assert [s.modeling_date.year for s in three] == [2012, 2013, 2014]

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            TemporalConfig(start_date=dt.date(2017, 1, 1), end_date=JAN,
                           interval_months=6, label_window_months=6, k=150)
        with pytest.raises(ValidationError):
            TemporalConfig(start_date=JAN, end_date=JAN, interval_months=0,
                           label_window_months=6, k=150)
        with pytest.raises(ValidationError):
            TemporalConfig(start_date=JAN, end_date=JAN, interval_months=6,
                           label_window_months=6, k=0)

    def test_split_window_must_extend_forward(self):
        with pytest.raises(ValidationError):
            TemporalSplit(modeling_date=JAN, window_end=JAN)


class TestEvaluateSplit:
    def test_known_precision(self):
        ev = evaluate_split(_scores(200, 109), _split(JAN), k=150)
        assert ev.precision_at_k == 109 / 150
        assert round(ev.precision_at_k, 3) == 0.727
        assert ev.n_evaluated == 200
        assert ev.k_effective == 150
        assert ev.model_id == "m"

    def test_perfect_top_k(self):
        ev = evaluate_split(_scores(60, 50), _split(JAN), k=50)
        assert ev.precision_at_k == 1.0

    def test_short_list_strict_vs_lenient(self):
        short = _scores(80, 30)
        with pytest.raises(DataError):
            evaluate_split(short, _split(JAN), k=150)
        ev = evaluate_split(short, _split(JAN), k=150, mode="lenient")
        assert ev.k_effective == 80
        assert ev.precision_at_k == 30 / 80

    def test_date_mismatch_is_leakage(self):
        rows = _scores(10, 5, date=dt.date(2012, 2, 1))
        with pytest.raises(ValidationError) as err:
            evaluate_split(rows, _split(JAN), k=5)
        assert "leak" in str(err.value)

    def test_undated_rows_rejected(self):
        rows = [ScoredExample(entity_id="e1", score=0.5, label=1, model_id="m")]
        with pytest.raises(ValidationError):
            evaluate_split(rows, _split(JAN), k=1)

    def test_mixed_models_rejected(self):
        rows = _scores(5, 2, k=5) + _scores(5, 2, k=5, model="other")
        with pytest.raises(ValidationError):
            evaluate_split(rows, _split(JAN), k=3)

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            evaluate_split([], _split(JAN), k=5)

    def test_matches_counting_oracle(self):
        rng = random.Random(51)
        for trial in range(100):
            inst = O.random_instance(rng, max_groups=1, force_ties=trial % 2 == 0)
            rows = O.flatten(inst)
            k = rng.randint(1, len(rows))
            examples = [
                ScoredExample(entity_id=e, score=s, label=l, as_of_date=JAN,
                              model_id="m")
                for e, s, l in rows
            ]
            ev = evaluate_split(examples, _split(JAN), k=k, mode="lenient")
            top = O.top_k_ids(rows, k)
            want = sum(l for e, s, l in rows if e in top) / len(top)
            assert ev.precision_at_k == want


def _ev(model, date, precision):
    k = 1000
    return SplitEvaluation(
        model_id=model, modeling_date=date,
        precision_at_k=precision, n_evaluated=k, k_effective=k,
    )


JUL = dt.date(2012, 7, 1)


class TestSelectModel:
    def test_stability_rule_prefers_steady_model(self):
        evs = [
            _ev("X", JAN, 0.8), _ev("X", JUL, 0.8),
            _ev("Y", JAN, 0.9), _ev("Y", JUL, 0.6),
        ]
        ranking = select_model(evs, SelectionRule())
        assert ranking[0] == ("X", 0.8)
        assert ranking[1][0] == "Y"
        assert ranking[1][1] == pytest.approx(0.75 - 0.15)

    def test_lambda_zero_equals_best_mean(self):
        rng = random.Random(52)
        for _ in range(50):
            evs = []
            for m in "ABC":
                for i, date in enumerate((JAN, JUL)):
                    evs.append(_ev(m, date, round(rng.random(), 6)))
            lam0 = select_model(
                evs, SelectionRule(rule="mean_minus_lambda_stddev", lambda_=0.0)
            )
            mean = select_model(
                evs, SelectionRule(rule="best_mean", lambda_=None)
            )
            assert lam0 == mean

    def test_min_regret_is_zero_for_split_winner(self):
        evs = [
            _ev("X", JAN, 0.9), _ev("Y", JAN, 0.7),
            _ev("X", JUL, 0.5), _ev("Y", JUL, 0.8),
        ]
        ranking = dict(select_model(
            evs, SelectionRule(rule="min_regret", lambda_=None)
        ))
        # X wins JAN by .2, loses JUL by .3 -> mean regret .15
        assert ranking["X"] == pytest.approx(0.15)
        assert ranking["Y"] == pytest.approx(0.10)
        sole = select_model(
            [_ev("X", JAN, 0.9)], SelectionRule(rule="min_regret", lambda_=None)
        )
        assert sole == [("X", 0.0)]

    def test_ties_break_by_model_id(self):
        evs = [
            _ev("b", JAN, 0.5), _ev("a", JAN, 0.5), _ev("c", JAN, 0.5),
        ]
        ranking = select_model(evs, SelectionRule(rule="best_mean", lambda_=None))
        assert [m for m, _ in ranking] == ["a", "b", "c"]

    def test_stddev_rule_needs_two_evaluations(self):
        with pytest.raises(ValidationError):
            select_model([_ev("X", JAN, 0.9)], SelectionRule())

    def test_empty_and_duplicate_evaluations_rejected(self):
        with pytest.raises(ValidationError):
            select_model([], SelectionRule())
        dup = [_ev("X", JAN, 0.5), _ev("X", JAN, 0.6)]
        with pytest.raises(ValidationError):
            select_model(dup, SelectionRule(rule="best_mean", lambda_=None))

    def test_rule_validation(self):
        with pytest.raises(ValidationError):
            SelectionRule(rule="coin_flip", lambda_=None)
        with pytest.raises(ValidationError):
            SelectionRule(rule="mean_minus_lambda_stddev", lambda_=None)
        with pytest.raises(ValidationError):
            SelectionRule(rule="best_mean", lambda_=1.0)
        assert SelectionRule.from_payload({}).lambda_ == 1.0


class TestDriver:
    CFG = TemporalConfig(
        start_date=JAN, end_date=JUL, interval_months=6,
        label_window_months=6, k=150,
    )

    @pytest.fixture()
    def fixture_cohort(self):
        return parse_score_file(FIXTURE, IngestConfig())

    def test_fixture_end_to_end(self, fixture_cohort):
        result = run_temporal_eval(fixture_cohort, self.CFG)
        assert len(result.splits) == 2
        assert len(result.evaluations) == 4
        by_cell = {
            (e.model_id, e.modeling_date): e.precision_at_k
            for e in result.evaluations
        }
        assert by_cell[("m1", JAN)] == 109 / 150
        assert by_cell[("m1", JUL)] == 104 / 150
        assert by_cell[("m2", JAN)] == 119 / 150
        assert by_cell[("m2", JUL)] == 95 / 150
        # default stability rule favors the steadier model
        assert result.ranking[0][0] == "m1"

    def test_rules_disagree_on_fixture(self, fixture_cohort):
        by_mean = run_temporal_eval(
            fixture_cohort, self.CFG,
            SelectionRule(rule="best_mean", lambda_=None),
        )
        assert by_mean.ranking[0][0] == "m2"
        by_regret = run_temporal_eval(
            fixture_cohort, self.CFG,
            SelectionRule(rule="min_regret", lambda_=None),
        )
        assert by_regret.ranking[0][0] == "m2"

    def test_overlap_reported(self, fixture_cohort):
        result = run_temporal_eval(fixture_cohort, self.CFG)
        assert result.entity_overlap["entities_evaluated"] == 200
        assert result.entity_overlap["entities_in_multiple_splits"] == 200

    def test_rows_off_modeling_dates_ignored(self, fixture_cohort):
        narrower = TemporalConfig(
            start_date=JAN, end_date=JAN, interval_months=6,
            label_window_months=6, k=150,
        )
        result = run_temporal_eval(
            fixture_cohort, narrower,
            SelectionRule(rule="best_mean", lambda_=None),
        )
        assert len(result.evaluations) == 2
        assert {e.modeling_date for e in result.evaluations} == {JAN}

    def test_no_usable_rows_is_data_error(self, fixture_cohort):
        off = TemporalConfig(
            start_date=dt.date(2020, 1, 1), end_date=dt.date(2020, 1, 1),
            interval_months=6, label_window_months=6, k=150,
        )
        with pytest.raises(DataError):
            run_temporal_eval(fixture_cohort, off)

    def test_payload_shape(self, fixture_cohort):
        payload = run_temporal_eval(fixture_cohort, self.CFG).to_payload()
        assert set(payload) == {
            "config", "rule", "splits", "evaluations", "ranking",
            "entity_overlap",
        }
        assert payload["splits"][0]["modeling_date"] == "2012-01-01"
        assert payload["splits"][0]["window_end"] == "2012-07-01"
        assert payload["ranking"][0]["model_id"] == "m1"
        assert payload["config"]["k"] == 150
