from dataclasses import replace

import numpy as np
import pytest

from sgail import (
    AirlDiscriminator,
    BetaSchedule,
    ConditionalPolicy,
    ConfigError,
    EnvId,
    ExperimentConfig,
    ExperimentId,
    ActionModel,
    CheckpointFormatError,
    MetricsRecord,
    PlainDiscriminator,
    TaskVariable,
    TrainConfig,
    ValueFunction,
    conditions,
    default_grid_world,
    evaluate_checkpoint,
    export_value_heatmap,
    load_checkpoint,
    oracle_report,
    plot_curves,
    read_heatmap,
    read_manifest,
    reward_correlation,
    run_experiment,
    run_training,
    write_metrics,
)

GRID = default_grid_world()
TASK = TaskVariable(0)
TINY = TrainConfig(epochs=1, episodes_per_epoch=1, eval_trials=1, hidden_layers=(4,), n_experts=1, horizon=20)


def _names(experiment, **kwargs):
    return [c.name for c in conditions(ExperimentConfig(experiment=experiment, **kwargs))]


def test_grid_variants():
    arms = conditions(ExperimentConfig(ExperimentId.GridVariants))
    assert [a.name for a in arms] == ["sgail+erc", "sgail", "infogail", "infogail+airl", "infogail+airl+erc"]
    assert [a.train.variant.erc for a in arms] == [True, False, False, False, True]
    assert len({a.train.beta for a in arms}) == 1


def test_grid_erc_schedules():
    arms = conditions(ExperimentConfig(ExperimentId.GridErc, train=TrainConfig(epochs=100)))
    assert [a.name for a in arms] == ["sgail+erc-beta0.9", "sgail+erc-beta0.6", "sgail+erc-beta0.9-0.6",
                                      "sgail+erc-beta0.9-0"]
    assert all(a.train.n_experts == 5 and a.train.variant.name == "sgail+erc" for a in arms)
    assert arms[2].train.beta.span == 50


def test_single_versus_multitask():
    cfg = ExperimentConfig(ExperimentId.GridSingleVsMulti, train=TrainConfig(epochs=200))
    arms = {a.name: a.train for a in conditions(cfg)}
    assert list(arms) == ["sgail+erc", "airl", "airl+erc"]
    assert arms["sgail+erc"].n_experts == 5 and arms["airl"].n_experts == 10
    assert all(train.sweep_eval_starts for train in arms.values())
    ramp = BetaSchedule.linear(0.9, 0.6, 100)
    assert arms["sgail+erc"].beta == ramp
    assert arms["airl+erc"].beta == ramp


def test_reacher_conditions_switch_the_world():
    arms = conditions(ExperimentConfig(ExperimentId.Reacher))
    assert [a.name for a in arms] == ["sgail+erc", "infogail", "infogail+airl"]
    assert all(a.train.env == EnvId.Reacher for a in arms)


def test_variant_filter():
    assert _names(ExperimentId.GridVariants, variants=("infogail",)) == ["infogail"]
    with pytest.raises(ConfigError):
        conditions(ExperimentConfig(variants=("gail",)))


def test_zero_value_network_gives_a_zero_heatmap(tmp_path):
    value_fn = ValueFunction.build(2, hidden_layers=(4,))
    value_fn.set_params(np.zeros(value_fn.net.n_params))
    path = tmp_path / "heatmap.csv"
    grid = export_value_heatmap(value_fn, GRID, TASK, path)
    assert grid.shape == (11, 11)
    assert np.isnan(grid[5, 5]) and np.isnan(grid[4, 6])
    assert np.nansum(np.abs(grid)) == 0.0 and np.sum(np.isnan(grid)) == 9
    assert path.read_text().splitlines()[5].split(",")[4:7] == ["NA", "NA", "NA"]
    np.testing.assert_array_equal(read_heatmap(path), grid)


def test_heatmap_rows_are_y_and_columns_x(tmp_path):
    value_fn = ValueFunction.build(2, hidden_layers=(), conditioned=False)
    value_fn.set_params(np.array([1.0, 0.0, 0.0]))
    grid = export_value_heatmap(value_fn, GRID, TASK)
    assert grid[0, 10] == pytest.approx(1.0) and grid[10, 0] == pytest.approx(0.0)


def test_heatmap_needs_grid_features():
    with pytest.raises(CheckpointFormatError):
        export_value_heatmap(ValueFunction.build(6, hidden_layers=(4,)), GRID, TASK)


def test_median_curves(tmp_path):
    paths = []
    for seed, total in enumerate((10, 20, 30, 40, 0)):
        paths.append(tmp_path / f"metrics{seed}.csv")
        write_metrics([MetricsRecord(0, 0.9, 0.0, 0.0, 0.0, (total, 0))], paths[-1])
    curves = plot_curves(paths, tmp_path / "curves.csv")
    assert curves.loc[0, "success_total"] == 20
    assert curves.loc[0, "success_task1"] == 20 and curves.loc[0, "condition"] == "run"
    assert (tmp_path / "curves.csv").exists()
    with pytest.raises(ValueError):
        plot_curves([])


def test_reward_correlation_is_a_rank_correlation():
    policy = ConditionalPolicy.build(2, 4, ActionModel.Categorical, hidden_layers=(8,), init_seed=1)
    for head in (AirlDiscriminator, PlainDiscriminator):
        rho = reward_correlation(head.build(2, 4, hidden_layers=(8,), init_seed=2), policy, GRID, TASK)
        assert -1.0 <= rho <= 1.0


def test_oracle_report():
    report = oracle_report()
    assert list(report["task"]) == ["c1", "c2"]
    assert list(report["max_distance"]) == [20, 20]
    assert (report["residual"] <= 1e-10).all()
    assert report["uniform_success"].between(0.0, 1.0).all()


def test_tiny_experiment_writes_a_complete_artifact_set(tmp_path):
    cfg = ExperimentConfig(ExperimentId.GridVariants, seeds=(0,), out=str(tmp_path / "a"), train=TINY,
                           variants=("sgail+erc",))
    result = run_experiment(cfg, progress=False)
    run = tmp_path / "a" / "sgail+erc" / "seed0"
    for name in ("config.json", "experts.csv", "metrics.csv", "checkpoint.sgail", "heatmap_task1.csv",
                 "heatmap_task2.csv"):
        assert (run / name).exists()
    manifest = read_manifest(tmp_path / "a" / "manifest.csv")
    assert len(manifest) == 7 and manifest["complete"].all()
    assert list(result.summary["condition"].unique()) == ["sgail+erc"]

    again = run_experiment(ExperimentConfig(**(vars(cfg) | dict(out=str(tmp_path / "b")))), progress=False)
    assert again.runs[0].complete
    assert read_manifest(tmp_path / "b" / "manifest.csv").equals(manifest)

    successes = evaluate_checkpoint(load_checkpoint(run / "checkpoint.sgail"), TINY)
    assert sorted(t.index for t in successes) == [0, 1]
    assert all(0 <= s <= TINY.eval_trials for s in successes.values())


def test_failed_runs_still_leave_a_manifest(tmp_path):
    cfg = ExperimentConfig(ExperimentId.GridVariants, seeds=(0,), out=str(tmp_path), train=TrainConfig(n_tasks=3),
                           variants=("infogail",))
    with pytest.raises(ConfigError):
        run_experiment(cfg, progress=False)
    assert len(read_manifest(tmp_path / "manifest.csv")) == 0


def test_rerun_with_the_same_seed_is_byte_identical(tmp_path):
    cfg = replace(TINY, epochs=3, eval_interval=1, seed=4)
    run_training(cfg, tmp_path / "a")
    run_training(cfg, tmp_path / "b")
    for name in ("experts.csv", "metrics.csv", "checkpoint.sgail"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
