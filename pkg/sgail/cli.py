"""Command-line driver: ``sgail {train,eval,experiment,heatmap,oracle}``.

"""
import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .checkpoint import load_checkpoint
from .config import ExperimentConfig, load_config
from .experiment import evaluate_checkpoint, export_value_heatmap, oracle_report, run_experiment, run_training
from .trainer import evaluation_starts, load_learners, make_env
from .typus import EnvId
from .variant import ConfigError

__all__ = ["build_parser", "main"]

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgail", description="Multitask adversarial imitation learning runs.")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    commands = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Flat key = value config file.")
    common.add_argument("--seed", type=int, help="Run with this seed only.")
    common.add_argument("--out", help="Output directory.")
    common.add_argument("--variant", help="Model variant, e.g. sgail+erc, infogail, airl.")

    commands.add_parser("train", parents=[common], help="Train one variant with one seed.")
    evaluate = commands.add_parser("eval", parents=[common], help="Evaluate a checkpoint on every task.")
    evaluate.add_argument("--checkpoint", type=Path, required=True)
    commands.add_parser("experiment", parents=[common], help="Run every condition and seed of an experiment.")
    heatmap = commands.add_parser("heatmap", parents=[common], help="Write value heatmaps of a grid checkpoint.")
    heatmap.add_argument("--checkpoint", type=Path, required=True)
    commands.add_parser("oracle", parents=[common], help="Print oracle quantities of the configured grid.")
    return parser


def _train(cfg: ExperimentConfig, args) -> None:
    directory = Path(cfg.out) / cfg.train.variant.name / f"seed{cfg.train.seed}"
    result, _ = run_training(cfg.train, directory)
    last = result.records[-1]
    print(f"{cfg.train.variant.name} seed {cfg.train.seed}: epoch {last.epoch} successes "
          f"{'/'.join(str(s) for s in last.successes)} -> {directory}")


def _eval(cfg: ExperimentConfig, args) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    train = replace(cfg.train, env=checkpoint.env_id, n_slots=checkpoint.n_slots)
    env = make_env(train)
    for task, successes in evaluate_checkpoint(checkpoint, train).items():
        n_trials, _ = evaluation_starts(env, task, train)
        print(f"{task}: {successes}/{n_trials}")


def _experiment(cfg: ExperimentConfig, args) -> None:
    if args.variant is not None:
        cfg = replace(cfg, variants=(args.variant,))
    result = run_experiment(cfg)
    print(result.summary.to_string(index=False))


def _heatmap(cfg: ExperimentConfig, args) -> None:
    checkpoint = load_checkpoint(args.checkpoint)
    if checkpoint.env_id != EnvId.Grid:
        raise ConfigError("Value heatmaps exist for grid checkpoints only")
    world = make_env(replace(cfg.train, env=checkpoint.env_id, n_slots=checkpoint.n_slots))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for learner in load_learners(checkpoint):
        for task in learner.tasks:
            path = out / f"heatmap_task{task.index + 1}.csv"
            export_value_heatmap(learner.value_fn, world, task, path)
            print(path)


def _oracle(cfg: ExperimentConfig, _) -> None:
    world = make_env(replace(cfg.train, env=EnvId.Grid))
    print(oracle_report(world, cfg.train.tasks, cfg.train.gamma).to_string(index=False))


_COMMANDS = dict(train=_train, eval=_eval, experiment=_experiment, heatmap=_heatmap, oracle=_oracle)


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point; returns the exit status, 1 with a one-line diagnostic on failure."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out, variant=args.variant)
        _COMMANDS[args.command](cfg, args)
    except (ValueError, RuntimeError, OSError) as e:
        logger.debug("%s failed", args.command, exc_info=True)
        print(f"sgail {args.command}: {type(e).__name__}: {e}".splitlines()[0], file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
