"""Experiment designs, their on-disk artifacts and the diagnostics computed from them.

A run directory ``<out>/<condition>/seed<k>/`` holds ``config.json``, ``experts.csv``,
``metrics.csv``, ``checkpoint.sgail`` and, for the grid, one ``heatmap_task<k>.csv`` per
task. ``<out>/summary.csv`` carries the median curves of all conditions and
``<out>/manifest.csv`` the SHA-256 of every file written.

"""
import hashlib
import json
import logging
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from multipledispatch import dispatch
from ramp_core import RampJSONEncoder
from scipy.stats import spearmanr
from tqdm import tqdm

from .checkpoint import Checkpoint, CheckpointFormatError, save_checkpoint
from .config import ExperimentConfig
from .experts import expert_grid, expert_reacher
from .grid_world import GridWorld, action_vector, default_grid_world
from .metrics import read_metrics, success_columns, write_metrics
from .models import AirlDiscriminator, ConditionalPolicy, PlainDiscriminator, TransitionBatch, ValueFunction
from .oracle import bfs_shortest_path, grid_mdp, soft_advantage, soft_value_iteration, \
    uniform_policy_success_probability
from .reacher import ReacherWorld
from .rollout import observe, state_dim
from .task import TaskVariable, Trajectory, trajectories_to_csv
from .trainer import Learner, TrainConfig, TrainResult, load_learners, make_env, train
from .typus import EnvId, ExperimentId
from .variant import BetaSchedule, ConfigError, ModelVariant

__all__ = ["Condition", "RunArtifacts", "ExperimentResult", "conditions", "demonstrations", "run_training",
           "run_experiment", "export_value_heatmap", "read_heatmap", "plot_curves", "reward_correlation",
           "evaluate_checkpoint", "oracle_report", "write_config", "write_manifest", "read_manifest", "sha256"]

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "checkpoint.sgail"
MANIFEST_COLUMNS = ["path", "sha256", "complete"]


@dataclass(frozen=True)
class Condition:
    """One arm of an experiment: a name and the training configuration it runs with."""

    name: str
    train: TrainConfig


@dataclass
class RunArtifacts:
    condition: str
    seed: int
    directory: Path
    files: list[Path] = field(default_factory=list)
    complete: bool = False


@dataclass
class ExperimentResult:
    out: Path
    runs: list[RunArtifacts]
    summary: pd.DataFrame


def _variant(name: str, base: ModelVariant) -> ModelVariant:
    return ModelVariant.from_name(name, info_lambda1=base.info_lambda1, info_lambda2=base.info_lambda2)


def conditions(cfg: ExperimentConfig) -> list[Condition]:
    """The conditions of an experiment design, derived from the base training config.

    grid-variants compares S-GAIL with and without ERC against the three InfoGAIL learners;
    grid-erc runs S-GAIL+ERC under four β schedules on five demonstrations per task, the
    ramps spanning half the epochs; grid-singleVsMulti pits S-GAIL+ERC on five demonstrations
    per task against separate AIRL models that each get ten of their own task, all on the
    0.9 to 0.6 ramp and evaluated from every cell; reacher compares three learners on the arm.

    Raises
    ------
    ConfigError if a variant filter leaves no condition.

    """
    base = cfg.train
    if cfg.experiment == ExperimentId.Reacher:
        base = replace(base, env=EnvId.Reacher, layout=None)
    elif base.env != EnvId.Grid:
        base = replace(base, env=EnvId.Grid)
    span = max(1, base.epochs // 2)

    match cfg.experiment:
        case ExperimentId.GridVariants:
            arms = [Condition(name, replace(base, variant=_variant(name, base.variant)))
                    for name in ("sgail+erc", "sgail", "infogail", "infogail+airl", "infogail+airl+erc")]
        case ExperimentId.GridErc:
            sgail = _variant("sgail+erc", base.variant)
            schedules = [BetaSchedule.constant(0.9), BetaSchedule.constant(0.6), BetaSchedule.linear(0.9, 0.6, span),
                         BetaSchedule.linear(0.9, 0.0, span)]
            arms = [Condition(f"sgail+erc-{s.label}", replace(base, variant=sgail, beta=s, n_experts=5))
                    for s in schedules]
        case ExperimentId.GridSingleVsMulti:
            swept = replace(base, sweep_eval_starts=True, beta=BetaSchedule.linear(0.9, 0.6, span))
            arms = [Condition("sgail+erc", replace(swept, variant=_variant("sgail+erc", base.variant), n_experts=5)),
                    Condition("airl", replace(swept, variant=_variant("airl", base.variant), n_experts=10)),
                    Condition("airl+erc", replace(swept, variant=_variant("airl+erc", base.variant), n_experts=10))]
        case _:
            arms = [Condition(name, replace(base, variant=_variant(name, base.variant)))
                    for name in ("sgail+erc", "infogail", "infogail+airl")]

    if cfg.variants is not None:
        arms = [a for a in arms if a.name in cfg.variants or a.train.variant.name in cfg.variants]
        if not arms:
            raise ConfigError(f"No condition of {cfg.experiment.value} matches {list(cfg.variants)}")
    return arms


@dispatch(GridWorld, TaskVariable, int, np.random.Generator)
def demonstrations(world, task, n, rng):
    """Expert trajectories of one task, from the shortest-path expert on the grid."""
    return expert_grid(world, task, n, rng)


@dispatch(ReacherWorld, TaskVariable, int, np.random.Generator)
def demonstrations(world, task, n, rng):  # noqa: F811
    return expert_reacher(world, task, n, rng)


def _experts(env, cfg: TrainConfig) -> dict[TaskVariable, list[Trajectory]]:
    return {task: demonstrations(env, task, cfg.n_experts, np.random.default_rng([cfg.seed, 1, task.index]))
            for task in cfg.tasks}


def sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_config(cfg: TrainConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg, cls=RampJSONEncoder, indent=2))


def write_manifest(runs: Sequence[RunArtifacts], out: str | Path, extra: Sequence[Path] = ()) -> Path:
    """List every produced file with its hash; files of unfinished runs are flagged incomplete."""
    out = Path(out)
    rows = [(f.relative_to(out).as_posix(), sha256(f), run.complete)
            for run in runs for f in run.files if f.exists()]
    rows += [(f.relative_to(out).as_posix(), sha256(f), True) for f in extra if f.exists()]
    path = out / "manifest.csv"
    pd.DataFrame(rows, columns=MANIFEST_COLUMNS).to_csv(path, index=False)
    return path


def read_manifest(path: str | Path) -> pd.DataFrame:
    frame = pd.read_csv(path)
    if list(frame.columns) != MANIFEST_COLUMNS:
        raise ValueError(f"{path} is not a run manifest")
    return frame


def _owner(learners: Sequence[Learner], task: TaskVariable) -> Learner:
    return next(learner for learner in learners if task in learner.tasks)


def run_training(cfg: TrainConfig, directory: str | Path, env=None,
                 artifacts: RunArtifacts | None = None) -> tuple[TrainResult, RunArtifacts]:
    """Generate demonstrations, train one configuration and write its run directory.

    ``artifacts`` collects the written files as they appear, so a failing run still leaves
    a record of its partial output.

    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    artifacts = RunArtifacts(cfg.variant.name, cfg.seed, directory) if artifacts is None else artifacts
    env = make_env(cfg) if env is None else env

    write_config(cfg, directory / "config.json")
    artifacts.files.append(directory / "config.json")
    experts = _experts(env, cfg)
    trajectories_to_csv([t for trajectories in experts.values() for t in trajectories], directory / "experts.csv")
    artifacts.files.append(directory / "experts.csv")

    result = train(cfg, experts, env)
    write_metrics(result.records, directory / "metrics.csv")
    artifacts.files.append(directory / "metrics.csv")
    save_checkpoint(result.checkpoint, directory / CHECKPOINT_FILE)
    artifacts.files.append(directory / CHECKPOINT_FILE)
    if isinstance(env, GridWorld):
        for task in cfg.tasks:
            path = directory / f"heatmap_task{task.index + 1}.csv"
            export_value_heatmap(_owner(result.learners, task).value_fn, env, task, path)
            artifacts.files.append(path)
    artifacts.complete = True
    return result, artifacts


def run_experiment(cfg: ExperimentConfig, progress: bool = True) -> ExperimentResult:
    """Train every condition of the experiment with every seed and write the artifact set.

    Raises
    ------
    Whatever a run raises; the manifest is written first, flagging the unfinished run.

    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    arms = conditions(cfg)
    runs: list[RunArtifacts] = []
    metrics: dict[str, list[Path]] = {}
    try:
        for arm, seed in tqdm(list(product(arms, cfg.seeds)), desc=cfg.experiment.value, disable=not progress):
            directory = out / arm.name / f"seed{seed}"
            run = RunArtifacts(arm.name, seed, directory)
            runs.append(run)
            logger.info("%s: training %s with seed %d", cfg.experiment.value, arm.name, seed)
            run_training(replace(arm.train, seed=seed), directory, artifacts=run)
            metrics.setdefault(arm.name, []).append(directory / "metrics.csv")
    except Exception:
        logger.error("%s stopped early; see %s", cfg.experiment.value, write_manifest(runs, out))
        raise
    summary = plot_curves(metrics)
    summary.to_csv(out / "summary.csv", index=False)
    write_manifest(runs, out, extra=[out / "summary.csv"])
    return ExperimentResult(out, runs, summary)


def export_value_heatmap(value_fn: ValueFunction, world: GridWorld, task: TaskVariable,
                         path: str | Path | None = None) -> np.ndarray:
    """V(s, c) at every cell as a (height, width) matrix with row = y, column = x and NaN at puddles.

    The CSV form writes puddles as NA and has no header.

    Raises
    ------
    CheckpointFormatError if the value network does not take this world's features.

    """
    expected = state_dim(world) + (value_fn.n_slots if value_fn.conditioned else 0)
    if value_fn.net.spec.input_dim != expected:
        raise CheckpointFormatError(f"Value network takes {value_fn.net.spec.input_dim} inputs, "
                                    f"this world needs {expected}")
    cells = world.free_cells
    values = value_fn(observe(world, np.array(cells, dtype=np.float64)), task)
    grid = np.full((world.height, world.width), np.nan)
    for (x, y), v in zip(cells, np.atleast_1d(values)):
        grid[y, x] = v
    if path is not None:
        pd.DataFrame(grid).to_csv(path, header=False, index=False, na_rep="NA", float_format="%.17g")
    return grid


def read_heatmap(path: str | Path) -> np.ndarray:
    return pd.read_csv(path, header=None, na_values=["NA"], float_precision="round_trip").to_numpy(dtype=np.float64)


def plot_curves(runs: Mapping[str, Sequence[str | Path]] | Sequence[str | Path], path: str | Path | None = None
                ) -> pd.DataFrame:
    """Median success across seeds per condition and epoch.

    Parameters
    ----------
    runs - Metrics CSVs by condition name; a plain sequence is one condition called "run".
    path - Where to write the curves as CSV.

    Returns
    -------
    Columns condition, epoch, success_task<k> per task and success_total (the median of
    the per-seed totals). No graphics are produced.

    Raises
    ------
    SchemaError if a metrics file does not have the metrics columns.
    ValueError if there is no metrics file.

    """
    if not isinstance(runs, Mapping):
        runs = {"run": list(runs)}
    frames = []
    for condition, paths in runs.items():
        for seed, metrics_path in enumerate(paths):
            records = read_metrics(metrics_path)
            if not records:
                continue
            columns = success_columns(len(records[0].successes))
            frame = pd.DataFrame([[r.epoch, *r.successes] for r in records], columns=["epoch", *columns])
            frame["success_total"] = frame[columns].sum(axis=1)
            frame.insert(0, "run", seed)
            frame.insert(0, "condition", condition)
            frames.append(frame)
    if not frames:
        raise ValueError("No metrics to summarize")
    curves = (pd.concat(frames, ignore_index=True)
              .drop(columns="run")
              .groupby(["condition", "epoch"], sort=False)
              .median()
              .reset_index())
    if path is not None:
        curves.to_csv(path, index=False)
    return curves


def _grid_batch(world: GridWorld, task: TaskVariable, cells, n_slots: int) -> TransitionBatch:
    pairs = [(cell, a) for cell in cells for a in range(4)]
    features = observe(world, np.array([cell for cell, _ in pairs], dtype=np.float64))
    actions = np.array([action_vector(a) for _, a in pairs])
    tasks = np.tile(TaskVariable(task.index, n_slots).vector, (len(pairs), 1))
    return TransitionBatch(features, actions, tasks, features, np.zeros(len(pairs), dtype=bool))


def reward_correlation(discriminator: AirlDiscriminator | PlainDiscriminator, policy: ConditionalPolicy,
                       world: GridWorld, task: TaskVariable, gamma: float = 0.95, omega: float = 1.0) -> float:
    """Spearman rank correlation of the learned f(s, a, c) with the oracle soft advantage.

    The oracle rewards entering the goal of ``task`` with +1. Pairs at the goal itself are
    left out since the goal ends the episode. For a plain discriminator its logit stands in
    for f.

    """
    goal = world.goal(task)
    cells = [cell for cell in world.free_cells if cell != goal]
    batch = _grid_batch(world, task, cells, discriminator.n_slots)
    batch = replace(batch, log_pi=policy.log_prob(batch.features, batch.tasks, batch.actions))
    learned = discriminator.f(batch) if isinstance(discriminator, AirlDiscriminator) else discriminator.logit(batch)

    mdp, states = grid_mdp(world, task, gamma, omega)
    solution = soft_value_iteration(mdp)
    index = {cell: i for i, cell in enumerate(states)}
    rows = [index[cell] for cell in cells]
    oracle = soft_advantage(solution.value, solution.q, omega)[rows].ravel()
    return float(spearmanr(learned, oracle)[0])


def evaluate_checkpoint(checkpoint: Checkpoint, cfg: TrainConfig, epoch: int = 0) -> dict[TaskVariable, int]:
    """Greedy evaluation successes per task of a checkpointed model."""
    cfg = replace(cfg, env=checkpoint.env_id, n_slots=checkpoint.n_slots)
    env = make_env(cfg)
    learners = load_learners(checkpoint)
    tasks = sorted((task for learner in learners for task in learner.tasks), key=lambda t: t.index)
    return {task: _owner(learners, task).evaluate(env, task, cfg, epoch) for task in tasks}


def oracle_report(world: GridWorld | None = None, tasks: Sequence[TaskVariable] | None = None,
                  gamma: float = 0.95, omega: float = 1.0) -> pd.DataFrame:
    """Soft value iteration, BFS distances and uniform-policy success per task of a grid."""
    world = default_grid_world() if world is None else world
    tasks = [TaskVariable(k) for k in range(len(world.goals))] if tasks is None else tasks
    rows = []
    for task in tasks:
        goal = world.goal(task)
        solution = soft_value_iteration(grid_mdp(world, task, gamma, omega)[0])
        starts = world.start_cells(exclude=[goal])
        distances = [bfs_shortest_path(world, start, goal)[0] for start in starts]
        uniform = [uniform_policy_success_probability(world, task, start) for start in starts]
        rows.append(dict(task=str(task), goal=f"{goal[0]},{goal[1]}", sweeps=solution.iterations,
                         residual=solution.residual, max_value=float(solution.value.max()),
                         mean_distance=float(np.mean(distances)), max_distance=int(np.max(distances)),
                         uniform_success=float(np.mean(uniform))))
    return pd.DataFrame(rows)
