"""Scenario runs: determinism, report files, summaries, figures, baseline."""

import numpy as np
import pytest

from clickstats.experiments import (
    SCENARIO_PRESETS,
    BaselineRow,
    Scenario,
    ScenarioConfigError,
    build_figure,
    emit_baseline_plot,
    emit_plot,
    fig4_scenario,
    fig5_scenario,
    fig6_scenario,
    read_baseline,
    read_report_rows,
    run_fig3_baseline,
    run_scenario,
    write_baseline,
    write_history,
    write_report,
)
from clickstats.mlp import TrainingConfig
from clickstats.states import DetectorConfig


def tiny_scenario(**overrides):
    defaults = dict(
        name="tiny",
        detector=DetectorConfig(16, 1.0),
        sample_sizes=(200,),
        families=("coherent", "fock"),
        realizations=6,
        points_per_family=4,
        training=TrainingConfig(max_epochs=3),
        bootstrap=100,
        seed=0,
    )
    defaults.update(overrides)
    return Scenario(**defaults)


@pytest.fixture(scope="module")
def tiny_report():
    return run_scenario(tiny_scenario())


@pytest.fixture(scope="module")
def mixture_report(tiny_report):
    scenario = tiny_scenario(
        name="mix",
        families=(),
        mixture_photon_numbers=(3,),
        realizations=5,
    )
    return run_scenario(scenario, models=dict(tiny_report.models))


@pytest.fixture(scope="module")
def baseline():
    return run_fig3_baseline(realizations=5, points_per_family=20, seed=0)


class TestScenarioValidation:
    def test_needs_sample_sizes(self):
        with pytest.raises(ScenarioConfigError):
            tiny_scenario(sample_sizes=())

    def test_needs_sweep(self):
        with pytest.raises(ScenarioConfigError):
            tiny_scenario(families=(), mixture_photon_numbers=())

    def test_model_path_count(self):
        with pytest.raises(ScenarioConfigError):
            tiny_scenario(model_paths=("a.json", "b.json"))

    def test_needs_model_source(self):
        with pytest.raises(ScenarioConfigError):
            tiny_scenario(train_models=False)

    def test_negative_realizations(self):
        with pytest.raises(ScenarioConfigError):
            tiny_scenario(realizations=-1)

    def test_thread_count(self, tiny_report):
        with pytest.raises(ScenarioConfigError):
            run_scenario(tiny_scenario(), threads=0, models=tiny_report.models)


class TestRunScenario:
    def test_row_layout(self, tiny_report):
        # one row per (sample size, family, grid point), in sweep order
        assert len(tiny_report.rows) == 1 * 2 * 6
        assert [r.family for r in tiny_report.rows] == ["coherent"] * 6 + ["fock"] * 6
        assert all(r.sample_size == 200 for r in tiny_report.rows)
        assert all(r.eta == 1.0 for r in tiny_report.rows)
        assert all(r.p is None for r in tiny_report.rows)

    def test_nbar_grid(self, tiny_report):
        nbars = [r.nbar for r in tiny_report.rows[:6]]
        assert nbars == list(np.linspace(1.0, 16.0, 6))

    def test_flags_recomputable(self, tiny_report):
        scenario = tiny_report.scenario
        for row in tiny_report.rows:
            assert row.network_flag == (row.network_output > scenario.threshold)
            assert row.moments_flag == (row.r_mom > scenario.significance)
            assert 0.0 < row.network_output < 1.0

    def test_summary_matches_rows(self, tiny_report):
        assert [s.family for s in tiny_report.summary] == ["coherent", "fock"]
        for summary in tiny_report.summary:
            group = [r for r in tiny_report.rows if r.family == summary.family]
            assert summary.realizations == len(group)
            assert summary.network_flag_rate == np.mean([r.network_flag for r in group])
            assert summary.moments_flag_rate == np.mean([r.moments_flag for r in group])
        assert tiny_report.summary[0].label == 0
        assert tiny_report.summary[1].label == 1

    def test_repeat_run_identical(self, tiny_report):
        again = run_scenario(tiny_scenario())
        assert again.rows == tiny_report.rows
        assert again.summary == tiny_report.summary

    def test_threads_do_not_change_rows(self, tiny_report):
        threaded = run_scenario(
            tiny_scenario(), threads=3, models=dict(tiny_report.models)
        )
        assert threaded.rows == tiny_report.rows

    def test_model_injection_skips_training(self, tiny_report):
        injected = run_scenario(tiny_scenario(), models=dict(tiny_report.models))
        assert injected.histories == {}
        assert injected.rows == tiny_report.rows

    def test_history_recorded(self, tiny_report):
        history = tiny_report.histories[200]
        assert history.epochs_run == 3
        assert len(history.train_mse) == 3
        assert 0 <= history.best_epoch < 3

    def test_empty_sweep(self):
        report = run_scenario(tiny_scenario(realizations=0))
        assert report.rows == ()
        assert report.summary == ()


class TestMixtureSweep:
    def test_weight_grid(self, mixture_report):
        assert [r.p for r in mixture_report.rows] == list(np.linspace(0.0, 1.0, 5))
        assert all(r.nbar == 3.0 for r in mixture_report.rows)
        assert all(r.family == "mixture_n3" for r in mixture_report.rows)

    def test_summary_label(self, mixture_report):
        assert mixture_report.summary[0].label == 1
        assert mixture_report.summary[0].realizations == 5

    def test_round_trip(self, mixture_report, tmp_path):
        rows_path = tmp_path / "rows.csv"
        write_report(mixture_report, rows_path, tmp_path / "summary.csv")
        assert read_report_rows(rows_path) == mixture_report.rows


class TestReportFiles:
    def test_rows_round_trip(self, tiny_report, tmp_path):
        rows_path = tmp_path / "rows.csv"
        summary_path = tmp_path / "summary.csv"
        write_report(tiny_report, rows_path, summary_path)
        assert read_report_rows(rows_path) == tiny_report.rows
        text = summary_path.read_text()
        assert text.startswith("# clickstats-summary v1\n")
        assert len(text.splitlines()) == 2 + len(tiny_report.summary)

    def test_schema_checked(self, tmp_path):
        path = tmp_path / "rows.csv"
        path.write_text("# other format\n")
        with pytest.raises(ValueError):
            read_report_rows(path)

    def test_history_file(self, tiny_report, tmp_path):
        path = tmp_path / "history.csv"
        write_history(tiny_report.histories[200], path)
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,train_mse,val_mse"
        assert len(lines) == 1 + tiny_report.histories[200].epochs_run
        assert lines[1].startswith("0,")


class TestFigures:
    def test_network_threshold_line(self, tiny_report):
        fig = build_figure(tiny_report, "network")
        ax = fig.axes[0]
        line_levels = [line.get_ydata()[0] for line in ax.lines]
        assert tiny_report.scenario.threshold in line_levels

    def test_moments_panel_clamps_negatives(self, tiny_report):
        fig = build_figure(tiny_report, "moments")
        ax = fig.axes[0]
        assert ax.collections, "expected scatter series"
        for coll in ax.collections:
            offsets = np.asarray(coll.get_offsets())
            assert offsets[:, 1].min() >= 0.0

    def test_one_panel_per_sample_size(self, tiny_report):
        fig = build_figure(tiny_report, "network")
        assert len(fig.axes) == len(tiny_report.scenario.sample_sizes)

    def test_unknown_kind(self, tiny_report):
        with pytest.raises(ValueError):
            build_figure(tiny_report, "histogram")

    def test_svg_byte_deterministic(self, tiny_report, tmp_path):
        path_a = tmp_path / "a.svg"
        path_b = tmp_path / "b.svg"
        assert emit_plot(tiny_report, "network", path_a) == path_a
        emit_plot(tiny_report, "network", path_b)
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_empty_report_warns(self, tmp_path):
        report = run_scenario(tiny_scenario(realizations=0))
        with pytest.warns(UserWarning):
            assert emit_plot(report, "network", tmp_path / "x.svg") is None


class TestBaseline:
    def test_row_layout(self, baseline):
        model, rows = baseline
        assert len(rows) == 4 * 5
        assert [r.family for r in rows[::5]] == [
            "coherent", "thermal", "fock", "squeezed",
        ]
        assert all(np.isfinite(r.score) for r in rows)
        assert model.coefficients.shape == (17,)

    def test_deterministic(self, baseline):
        _, again = run_fig3_baseline(realizations=5, points_per_family=20, seed=0)
        assert again == baseline[1]

    def test_round_trip(self, baseline, tmp_path):
        path = tmp_path / "baseline.csv"
        write_baseline(baseline[1], path)
        assert read_baseline(path) == baseline[1]

    def test_plot(self, baseline, tmp_path):
        path = tmp_path / "baseline.svg"
        assert emit_baseline_plot(baseline[1], path) == path
        assert path.read_bytes().startswith(b"<?xml")
        with pytest.warns(UserWarning):
            assert emit_baseline_plot((), tmp_path / "empty.svg") is None

    def test_read_rejects_bad_schema(self, tmp_path):
        path = tmp_path / "baseline.csv"
        path.write_text("# clickstats-report v1\nfamily,nbar,score\n")
        with pytest.raises(ValueError):
            read_baseline(path)


class TestPresets:
    def test_registry(self):
        assert set(SCENARIO_PRESETS) == {"fig4", "fig5", "fig6"}

    def test_ideal_detection_layout(self):
        scenario = fig4_scenario()
        assert scenario.detector == DetectorConfig(16, 1.0)
        assert scenario.sample_sizes == (1000, 100)
        assert scenario.families == (
            "coherent", "thermal", "fock", "squeezed",
            "npats1", "npats2", "even_coherent",
        )
        assert scenario.realizations == 1000
        assert scenario.mixture_photon_numbers == ()

    def test_lossy_detection_layout(self):
        scenario = fig5_scenario()
        assert scenario.name == "fig5"
        assert scenario.detector == DetectorConfig(16, 0.6)
        assert scenario.sample_sizes == (1000, 100)

    def test_mixture_layout(self):
        scenario = fig6_scenario()
        assert scenario.name == "fig6"
        assert scenario.sample_sizes == (1000,)
        assert scenario.mixture_photon_numbers == (3, 8, 15)
        assert scenario.families == ()

    def test_overrides_apply(self):
        scenario = fig0 = fig4_scenario(seed=3, realizations=10)
        assert fig0.seed == 3
        assert scenario.realizations == 10
