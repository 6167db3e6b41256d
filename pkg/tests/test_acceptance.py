"""Reduced reproduction runs. They take tens of minutes and only run with ``--runslow``."""
import numpy as np
import pytest

from sgail import (
    EnvId,
    ExperimentConfig,
    ExperimentId,
    FeaturePolicy,
    ReacherWorld,
    TaskVariable,
    TrainConfig,
    default_grid_world,
    export_value_heatmap,
    inverse_kinematics,
    load_checkpoint,
    load_learners,
    make_state,
    rollout,
    run_experiment,
)

SEEDS = (0, 1, 2, 3, 4)


@pytest.fixture(scope="module")
def grid_runs(tmp_path_factory):
    cfg = ExperimentConfig(ExperimentId.GridVariants, seeds=SEEDS, out=str(tmp_path_factory.mktemp("grid")),
                           train=TrainConfig(epochs=5000, eval_interval=500), variants=("sgail+erc",))
    return run_experiment(cfg, progress=False)


@pytest.mark.slow
def test_sgail_learns_both_grid_tasks(grid_runs):
    final = grid_runs.summary[grid_runs.summary["epoch"] == 4999].iloc[0]
    assert final["success_task1"] >= 30
    assert final["success_task2"] >= 30


def _argmax_cell(grid):
    y, x = np.unravel_index(np.nanargmax(grid), grid.shape)
    return int(x), int(y)


@pytest.mark.slow
def test_value_functions_peak_at_their_own_goal(grid_runs):
    world = default_grid_world()
    separated = 0
    for run in grid_runs.runs:
        (learner,) = load_learners(load_checkpoint(run.directory / "checkpoint.sgail"))
        peaks = [_argmax_cell(export_value_heatmap(learner.value_fn, world, TaskVariable(k))) for k in range(2)]
        near = [max(abs(p[0] - g[0]), abs(p[1] - g[1])) <= 1 for p, g in zip(peaks, world.goals)]
        separated += all(near)
    assert separated >= 4


@pytest.fixture(scope="module")
def reacher_runs(tmp_path_factory):
    cfg = ExperimentConfig(ExperimentId.Reacher, seeds=SEEDS, out=str(tmp_path_factory.mktemp("reacher")),
                           train=TrainConfig(env=EnvId.Reacher, epochs=2000, eval_interval=500),
                           variants=("sgail+erc", "infogail"))
    return run_experiment(cfg, progress=False)


@pytest.mark.slow
def test_sgail_reaches_both_targets(reacher_runs):
    summary = reacher_runs.summary
    last = summary[summary["epoch"] == summary["epoch"].max()].set_index("condition")
    sgail, info = last.loc["sgail+erc"], last.loc["infogail"]
    assert sgail["success_total"] >= 28
    assert sgail["success_task1"] >= 12 and sgail["success_task2"] >= 12
    assert sgail["success_total"] >= info["success_total"] + 8


@pytest.mark.slow
def test_task_code_overrides_the_starting_position(reacher_runs):
    world = ReacherWorld()
    near_first = make_state(inverse_kinematics(world, np.array(world.targets[0]))[0])
    task = TaskVariable(1)
    reached = 0
    for run in reacher_runs.runs:
        if run.condition != "sgail+erc":
            continue
        (learner,) = load_learners(load_checkpoint(run.directory / "checkpoint.sgail"))
        traj = rollout(world, FeaturePolicy(world, learner.policy), task, 0, start=near_first, greedy=True)
        reached += traj.terminal
    assert reached >= 3
