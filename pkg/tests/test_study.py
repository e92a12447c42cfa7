import json

import pytest

from causalreg import (
    DesignSpec,
    Scenario,
    StudyConfig,
    StudyError,
    default_study_config,
    run_scenario,
    run_study,
)
from causalreg.study import estimates_csv, render_bias_table


def small_config(scenario_ids=("setup1",), replications=25, n=300, seed=5):
    full = default_study_config(
        replications=replications, sample_size=n, seed=seed, oracle_n=100_000
    )
    chosen = tuple(s for s in full.scenarios if s.id in scenario_ids)
    return StudyConfig(
        scenarios=chosen,
        replications=replications,
        sample_size=n,
        seed=seed,
        oracle_n=100_000,
    )


class TestConfig:
    def test_default_has_ten_scenarios(self):
        config = default_study_config()
        assert len(config.scenarios) == 10
        assert [s.id for s in config.scenarios] == [
            "setup1", "setup2", "setup3", "setup4", "setup4b",
            "setup5_conditional", "setup5_crude",
            "setup6_conditional", "setup6_crude", "setup7",
        ]

    def test_round_trip_through_json(self):
        config = default_study_config(replications=77, sample_size=200, seed=9)
        doc = json.loads(json.dumps(config.as_dict()))
        assert StudyConfig.from_dict(doc) == config

    def test_target_must_be_a_design_column(self):
        with pytest.raises(ValueError, match="not a design column"):
            Scenario("x", "setup1", DesignSpec("Y", ("L",)), target="A")

    def test_replications_bound(self):
        with pytest.raises(ValueError, match="replications"):
            StudyConfig(scenarios=(), replications=0)

    def test_sample_size_bound(self):
        with pytest.raises(ValueError, match="sample_size"):
            StudyConfig(scenarios=(), sample_size=5)

    def test_duplicate_ids_rejected(self):
        s = default_study_config().scenarios[0]
        with pytest.raises(ValueError, match="unique"):
            StudyConfig(scenarios=(s, s))

    def test_unknown_estimand(self):
        with pytest.raises(ValueError, match="estimand"):
            Scenario("x", "setup1", DesignSpec("Y", ("A",)), target="A",
                     estimand="median")


class TestRun:
    def test_setup1_small_run_is_roughly_unbiased(self):
        report = run_study(small_config(("setup1",)))
        entry = report.result("setup1")
        assert entry.replications == 25
        assert entry.failures == 0
        assert entry.true_provenance == "exact"
        assert abs(entry.bias) < 6 * entry.mc_se

    def test_bias_equals_mean_minus_truth(self):
        report = run_study(small_config(("setup3",)))
        entry = report.result("setup3")
        assert entry.bias == pytest.approx(entry.mean_estimate - entry.true_value)

    def test_run_scenario_matches_run_study(self):
        config = small_config(("setup6_crude",))
        alone = run_scenario(config.scenarios[0], config)
        batched = run_study(config).result("setup6_crude")
        assert alone == batched

    def test_logistic_scenario_uses_oracle_truth(self):
        config = small_config(("setup5_crude",), replications=10, n=200)
        report = run_study(config)
        entry = report.result("setup5_crude")
        assert entry.true_provenance == "oracle"
        assert 0.5 < entry.true_value < 1.2

    def test_empty_scenario_list_gives_empty_report(self):
        report = run_study(StudyConfig(scenarios=(), replications=5, sample_size=50))
        assert report.results == ()

    def test_inline_model_text(self):
        scenario = Scenario(
            "inline",
            "X ~ normal(0, 1)\nA ~ bernoulli(0.5)\nY ~ normal(2*A + X, 1)\n",
            DesignSpec("Y", ("A", "X")),
            target="A",
            true_value=2.0,
        )
        config = StudyConfig(
            scenarios=(scenario,), replications=20, sample_size=400, seed=3
        )
        entry = run_study(config).result("inline")
        assert abs(entry.bias) < 6 * entry.mc_se

    def test_failure_fraction_aborts(self):
        # The filter keeps ~0.1% of rows, so every replication fails.
        scenario = Scenario(
            "starved",
            "A ~ bernoulli(0.5)\nY ~ normal(A, 1)\nC ~ bernoulli(0.001)\n",
            DesignSpec("Y", ("A",)),
            target="A",
            true_value=1.0,
            require_ones=("C",),
        )
        config = StudyConfig(
            scenarios=(scenario,), replications=10, sample_size=100, seed=1
        )
        with pytest.raises(StudyError, match="replications failed"):
            run_study(config)

    def test_complete_case_filter_keeps_observed_rows(self):
        config = small_config(("setup7",), replications=8, n=500)
        entry = run_study(config).result("setup7")
        assert entry.failures == 0
        assert abs(entry.bias) < 0.3

    def test_complete_case_scenario_corroborates_graph_verdict(self):
        # The graphical verdict promises a valid complete-case regression;
        # the matching simulation should come out unbiased.
        from causalreg import complete_case_valid, mdag_fixture, model_fixture

        mdag = mdag_fixture("fig5")
        assert model_fixture("setup7").induced_dag() == mdag.base
        assert complete_case_valid(mdag, "A", "Y", {"L1", "L2"})
        config = small_config(("setup7",), replications=60, n=800)
        entry = run_study(config, workers=2).result("setup7")
        assert abs(entry.bias) < 5 * entry.mc_se


class TestDeterminismAndOutput:
    def test_worker_counts_agree_byte_for_byte(self):
        config = small_config(
            ("setup1", "setup6_conditional", "setup7"), replications=12, n=200
        )
        doc1 = json.dumps(run_study(config, workers=1).as_dict(), sort_keys=True)
        doc2 = json.dumps(run_study(config, workers=2).as_dict(), sort_keys=True)
        assert doc1 == doc2

    def test_scenario_order_does_not_change_values(self):
        config = small_config(("setup1", "setup6_crude"), replications=10, n=200)
        reversed_config = StudyConfig(
            scenarios=tuple(reversed(config.scenarios)),
            replications=config.replications,
            sample_size=config.sample_size,
            seed=config.seed,
            oracle_n=config.oracle_n,
        )
        a = run_study(config).result("setup1")
        b = run_study(reversed_config).result("setup1")
        assert a == b

    def test_estimates_csv(self):
        config = small_config(("setup1",), replications=6, n=100)
        report = run_study(config, keep_estimates=True)
        text = estimates_csv(report)
        lines = text.strip().splitlines()
        assert lines[0] == "scenario,replication,estimate"
        assert len(lines) == 7

    def test_estimates_require_keep_flag(self):
        report = run_study(small_config(("setup1",), replications=5, n=100))
        with pytest.raises(StudyError, match="keep_estimates"):
            estimates_csv(report)

    def test_render_bias_table(self):
        report = run_study(small_config(("setup1",), replications=5, n=100))
        text = render_bias_table(report)
        assert "ATE, setup 1: simple" in text
        assert "bias" in text
