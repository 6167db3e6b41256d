"""The adversarial training loop shared by all variants.

One epoch of a learner runs, in order: rollouts of the current policy with the tasks
taken round-robin; discriminator update(s) with log π of the current policy as a fixed
input; posterior update (InfoGAIL variants); pseudorewards from the updated
discriminator; advantages with the value function before its update; the value
regression step; and the trust-region step of the generator on the standardized
advantages.

"""
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence, Type, TypeVar

try:
    from typing import Self
except ImportError:
    Self = TypeVar("Self")

import numpy as np
from ramp_core.serializable import Serializable, deserialize_default
from scipy.stats import entropy

from .approximator import DimensionError
from .checkpoint import Checkpoint, LearnerState, NetworkState
from .grid_world import GridWorld, default_grid_world
from .metrics import MetricsRecord
from .models import (
    AirlDiscriminator,
    ConditionalPolicy,
    EmptyBatchError,
    PlainDiscriminator,
    PosteriorQ,
    TransitionBatch,
    ValueFunction,
    advantage,
)
from .optim import AdamConfig, AdamState, TrpoConfig, TrpoResult, adam_step, standardize, trpo_step
from .reacher import ReacherWorld
from .rollout import (
    Env,
    FeaturePolicy,
    action_dim,
    action_model,
    evaluate,
    observe,
    rollout,
    start_states,
    state_dim,
)
from .task import TaskVariable, Trajectory
from .typus import ActionModel, Algorithm, EnvId
from .variant import BetaSchedule, ConfigError, ModelVariant, beta_at

__all__ = ["TrainConfig", "TrainResult", "EpochStats", "Learner", "make_env", "evaluation_starts", "transitions",
           "returns_to_go", "discriminator_loss", "generator_update", "value_update", "mi_lower_bound", "task_prior",
           "train", "load_learners"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Settings of one training run.

    Parameters
    ----------
    variant - Learner and ERC switch.
    env - World to train in.
    n_experts - Expert trajectories per task.
    epochs - Training epochs.
    episodes_per_epoch - Generator rollouts per epoch (per learner).
    d_updates - Discriminator steps per epoch.
    gamma - Discount.
    lr_d, lr_v, lr_q - Adam learning rates of discriminator, value function and posterior.
    trpo - Trust-region settings.
    beta - Entropy-correction schedule, used when the variant has the ERC on.
    seed - Seed of everything random in the run.
    eval_interval - A record is made every this many epochs and after the last one.
    eval_trials - Evaluation episodes per task.
    hidden_layers - Hidden widths of all four networks.
    n_slots - Length of the task code.
    n_tasks - Number of active tasks.
    sweep_eval_starts - Evaluate grid tasks once from every cell but the goal instead of
                        from random starts.
    layout - Grid layout file, the shipped layout when None.
    horizon - Episode horizon, the world's default when None.

    """

    variant: ModelVariant = ModelVariant(Algorithm.SGAIL, erc=True)
    env: EnvId = EnvId.Grid
    n_experts: int = 30
    epochs: int = 1000
    episodes_per_epoch: int = 20
    d_updates: int = 1
    gamma: float = 0.95
    lr_d: float = 0.001
    lr_v: float = 0.001
    lr_q: float = 0.001
    trpo: TrpoConfig = TrpoConfig()
    beta: BetaSchedule = BetaSchedule.constant(0.9)
    seed: int = 0
    eval_interval: int = 250
    eval_trials: int = 40
    hidden_layers: tuple[int, ...] = (64, 64)
    n_slots: int = 3
    n_tasks: int = 2
    sweep_eval_starts: bool = False
    layout: str | None = None
    horizon: int | None = None

    ser_identifier = "TrainConfig"

    def __post_init__(self):
        object.__setattr__(self, "env", EnvId(self.env))
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        counts = dict(n_experts=self.n_experts, epochs=self.epochs, episodes_per_epoch=self.episodes_per_epoch,
                      d_updates=self.d_updates, eval_interval=self.eval_interval, n_tasks=self.n_tasks)
        for name, count in counts.items():
            if count < 1:
                raise ConfigError(f"{name} must be at least 1, got {count}")
        if self.eval_trials < 0:
            raise ConfigError(f"eval_trials must be non-negative, got {self.eval_trials}")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in [0, 1), got {self.gamma}")
        if min(self.lr_d, self.lr_v, self.lr_q) <= 0:
            raise ConfigError("Learning rates must be positive")
        if self.n_tasks > self.n_slots:
            raise ConfigError(f"{self.n_tasks} tasks do not fit a task code of length {self.n_slots}")
        if self.horizon is not None and self.horizon < 0:
            raise ConfigError(f"Negative horizon {self.horizon}")

    def serialize(self) -> tuple[str, dict[str, Any]]:
        return self.ser_identifier, dict(
            variant=self.variant.serialize(),
            env=self.env.value,
            n_experts=self.n_experts,
            epochs=self.epochs,
            episodes_per_epoch=self.episodes_per_epoch,
            d_updates=self.d_updates,
            gamma=self.gamma,
            lr_d=self.lr_d,
            lr_v=self.lr_v,
            lr_q=self.lr_q,
            trpo=self.trpo.serialize(),
            beta=self.beta.serialize(),
            seed=self.seed,
            eval_interval=self.eval_interval,
            eval_trials=self.eval_trials,
            hidden_layers=list(self.hidden_layers),
            n_slots=self.n_slots,
            n_tasks=self.n_tasks,
            sweep_eval_starts=self.sweep_eval_starts,
            layout=self.layout,
            horizon=self.horizon,
        )

    @classmethod
    def deserialize(cls: Type[Self], d: dict[str, Any], *, supported: dict[str, Type[Serializable]]) -> Self:
        return cls(**(d | dict(
            variant=deserialize_default(d["variant"], supported=supported, default=ModelVariant),
            trpo=deserialize_default(d["trpo"], supported=supported, default=TrpoConfig),
            beta=deserialize_default(d["beta"], supported=supported, default=BetaSchedule),
        )))

    @property
    def tasks(self) -> list[TaskVariable]:
        return [TaskVariable(k, self.n_slots) for k in range(self.n_tasks)]


def make_env(cfg: TrainConfig) -> Env:
    if cfg.env == EnvId.Grid:
        horizon = 60 if cfg.horizon is None else cfg.horizon
        world = GridWorld.load(cfg.layout, horizon) if cfg.layout else default_grid_world(horizon)
        if len(world.goals) < cfg.n_tasks:
            raise ConfigError(f"The layout has {len(world.goals)} goals for {cfg.n_tasks} tasks")
        return world
    world = ReacherWorld.default(cfg.horizon)
    if len(world.targets) < cfg.n_tasks:
        raise ConfigError(f"The reacher has {len(world.targets)} targets for {cfg.n_tasks} tasks")
    return world


def evaluation_starts(env: Env, task: TaskVariable, cfg: TrainConfig) -> tuple[int, list | None]:
    """Number of evaluation episodes of a task and their fixed starts, None for random ones."""
    if cfg.sweep_eval_starts and isinstance(env, GridWorld):
        starts = start_states(env, task)
        return len(starts), starts
    return cfg.eval_trials, None


def transitions(env: Env, trajectories: Sequence[Trajectory], n_slots: int = 3) -> TransitionBatch:
    """Stack the steps of trajectories; the last step of every episode is marked done."""
    features, actions, tasks, next_features, done = [], [], [], [], []
    for traj in trajectories:
        n = len(traj)
        if n == 0:
            continue
        features.append(observe(env, traj.states[:-1]))
        next_features.append(observe(env, traj.states[1:]))
        actions.append(traj.actions)
        tasks.append(np.tile(traj.task.vector, (n, 1)))
        done.append(np.arange(n) == n - 1)
    if not features:
        d_s, d_a = state_dim(env), action_dim(env)
        return TransitionBatch(np.zeros((0, d_s)), np.zeros((0, d_a)), np.zeros((0, n_slots)), np.zeros((0, d_s)),
                               np.zeros(0, dtype=bool))
    return TransitionBatch(np.vstack(features), np.vstack(actions), np.vstack(tasks), np.vstack(next_features),
                           np.concatenate(done))


def returns_to_go(rewards: np.ndarray, done: np.ndarray, gamma: float) -> np.ndarray:
    """Discounted sum of the rewards from each step to the end of its episode."""
    returns = np.zeros(len(rewards))
    running = 0.0
    for i in reversed(range(len(rewards))):
        running = rewards[i] + (0.0 if done[i] else gamma * running)
        returns[i] = running
    return returns


def task_prior(tasks: Sequence[TaskVariable], n_slots: int) -> np.ndarray:
    """Uniform prior over the active tasks; inactive slots get zero mass."""
    prior = np.zeros(n_slots)
    prior[[t.index for t in tasks]] = 1.0 / len(tasks)
    return prior


def discriminator_loss(discriminator: AirlDiscriminator | PlainDiscriminator, expert: TransitionBatch,
                       generator: TransitionBatch) -> tuple[float, np.ndarray]:
    """Negated discriminator objective and its gradient; both batches must carry log π."""
    return discriminator.loss_and_grad(expert, generator)


def mi_lower_bound(log_q: np.ndarray, task_indices, prior: np.ndarray, weights=None) -> float:
    """Variational bound E[log Q(c|s, a)] + H(c) on the mutual information of tasks and behaviour.

    Parameters
    ----------
    log_q - log Q(·|s, a), one row per transition.
    task_indices - Task of each transition.
    prior - Task prior p(c).
    weights - Probability weight of each row, uniform when None.

    """
    log_q = np.atleast_2d(np.asarray(log_q, dtype=np.float64))
    picked = log_q[np.arange(log_q.shape[0]), np.asarray(task_indices, dtype=int)]
    if picked.size == 0:
        raise EmptyBatchError("The mutual information bound needs at least one transition")
    expected = float(np.mean(picked)) if weights is None else float(np.sum(np.asarray(weights) * picked))
    return expected + float(entropy(prior))


def generator_update(policy: ConditionalPolicy, discriminator: AirlDiscriminator | PlainDiscriminator,
                     value_fn: ValueFunction, batch: TransitionBatch, beta: float, variant: ModelVariant,
                     gamma: float, trpo: TrpoConfig, posterior: PosteriorQ | None = None
                     ) -> tuple[TrpoResult, np.ndarray]:
    """Pseudorewards, advantages and the trust-region step of the generator.

    ``batch.log_pi`` must hold the current log π. The InfoGAIL variants add
    λ2 log Q(c|s, a) to the pseudoreward.

    Returns
    -------
    The trust-region result and the per-transition rewards, which the value regression
    reuses.

    """
    if len(batch) == 0:
        raise EmptyBatchError("Generator update without transitions")
    rewards = discriminator.reward(batch, beta, entropy_weight=variant.info_lambda1)
    if posterior is not None:
        log_q = posterior.log_q(batch.features, batch.actions)
        rewards = rewards + variant.info_lambda2 * log_q[np.arange(len(batch)), batch.task_indices]
    advantages = advantage(rewards, value_fn, batch.features, batch.next_features, batch.tasks, gamma, batch.done)
    result = trpo_step(policy, batch.features, batch.tasks, batch.actions, standardize(advantages), trpo)
    return result, rewards


def value_update(value_fn: ValueFunction, state: AdamState, batch: TransitionBatch, rewards: np.ndarray,
                 gamma: float, cfg: AdamConfig) -> tuple[float, AdamState]:
    """One Adam step of V towards the discounted return-to-go of the rewards."""
    targets = returns_to_go(rewards, batch.done, gamma)
    loss, grad = value_fn.loss_and_grad(batch.features, batch.tasks, targets)
    params, state = adam_step(value_fn.get_params(), grad, state, cfg)
    value_fn.set_params(params)
    return loss, state


@dataclass(frozen=True)
class EpochStats:
    d_loss: float = float("nan")
    v_loss: float = float("nan")
    surrogate_gain: float = 0.0
    q_loss: float = float("nan")


class Learner:
    """The networks and optimizer state of one model and the tasks it is trained on.

    Parameters
    ----------
    variant - The learner variant.
    tasks - Tasks this learner rolls out, round-robin.
    policy, discriminator, value_fn - The generator, the discriminator and V.
    posterior - Q(c|s, a) of the InfoGAIL variants, None otherwise.
    rng - Source of the learner's rollouts.

    """

    def __init__(self, variant: ModelVariant, tasks: Sequence[TaskVariable], policy: ConditionalPolicy,
                 discriminator: AirlDiscriminator | PlainDiscriminator, value_fn: ValueFunction,
                 posterior: PosteriorQ | None = None, rng: np.random.Generator | None = None):
        self.variant = variant
        self.tasks = list(tasks)
        self.policy = policy
        self.discriminator = discriminator
        self.value_fn = value_fn
        self.posterior = posterior
        self.rng = np.random.default_rng() if rng is None else rng
        self.d_state = AdamState.zeros(discriminator.net.n_params)
        self.v_state = AdamState.zeros(value_fn.net.n_params)
        self.q_state = None if posterior is None else AdamState.zeros(posterior.net.n_params)

    @classmethod
    def build(cls, variant: ModelVariant, env: Env, tasks: Sequence[TaskVariable], *, n_slots: int = 3,
              hidden_layers: Sequence[int] = (64, 64), seed=0) -> "Learner":
        rng = np.random.default_rng(seed)
        init = [int(s) for s in rng.integers(2 ** 31, size=4)]
        d_s, d_a = state_dim(env), action_dim(env)
        common = dict(n_slots=n_slots, hidden_layers=hidden_layers)
        policy = ConditionalPolicy.build(d_s, d_a, action_model(env), conditioned=variant.policy_conditioned,
                                         init_seed=init[0], **common)
        head = AirlDiscriminator if variant.airl_head else PlainDiscriminator
        discriminator = head.build(d_s, d_a, conditioned=variant.discriminator_conditioned, init_seed=init[1],
                                   **common)
        value_fn = ValueFunction.build(d_s, conditioned=variant.value_conditioned, init_seed=init[2], **common)
        posterior = (PosteriorQ.build(d_s, d_a, init_seed=init[3], **common) if variant.uses_posterior else None)
        return cls(variant, tasks, policy, discriminator, value_fn, posterior, rng)

    def with_log_pi(self, batch: TransitionBatch) -> TransitionBatch:
        if len(batch) == 0:
            return replace(batch, log_pi=np.zeros(0))
        return replace(batch, log_pi=self.policy.log_prob(batch.features, batch.tasks, batch.actions, clamped=True))

    def env_policy(self, env: Env) -> FeaturePolicy:
        return FeaturePolicy(env, self.policy)

    def run_epoch(self, env: Env, expert: TransitionBatch, beta: float, cfg: TrainConfig) -> EpochStats:
        trajectories = [rollout(env, self.env_policy(env), self.tasks[e % len(self.tasks)], self.rng)
                        for e in range(cfg.episodes_per_epoch)]
        generated = transitions(env, trajectories, cfg.n_slots)
        if len(generated) == 0:
            logger.debug("Every rollout started in a success state; skipping updates")
            return EpochStats()
        generated = self.with_log_pi(generated)
        expert = self.with_log_pi(expert)

        d_cfg = AdamConfig(lr=cfg.lr_d)
        for _ in range(cfg.d_updates):
            d_loss, grad = discriminator_loss(self.discriminator, expert, generated)
            params, self.d_state = adam_step(self.discriminator.get_params(), grad, self.d_state, d_cfg)
            self.discriminator.set_params(params)

        q_loss = float("nan")
        if self.posterior is not None:
            q_loss, grad = self.posterior.loss_and_grad(generated.features, generated.actions,
                                                        generated.task_indices)
            params, self.q_state = adam_step(self.posterior.get_params(), grad, self.q_state,
                                             AdamConfig(lr=cfg.lr_q))
            self.posterior.set_params(params)

        result, rewards = generator_update(self.policy, self.discriminator, self.value_fn, generated, beta,
                                           self.variant, cfg.gamma, cfg.trpo, self.posterior)
        v_loss, self.v_state = value_update(self.value_fn, self.v_state, generated, rewards, cfg.gamma,
                                            AdamConfig(lr=cfg.lr_v))
        return EpochStats(d_loss, v_loss, result.surrogate_gain, q_loss)

    def evaluate(self, env: Env, task: TaskVariable, cfg: TrainConfig, epoch: int) -> int:
        n_trials, starts = evaluation_starts(env, task, cfg)
        rng = np.random.default_rng([cfg.seed, epoch, task.index])
        return evaluate(env, self.env_policy(env), task, n_trials, rng, starts=starts, greedy=True)

    def state(self) -> LearnerState:
        networks = [NetworkState.of("policy", self.policy.net, self.policy.log_std, self.policy.conditioned),
                    NetworkState.of("discriminator", self.discriminator.net, None, self.discriminator.conditioned),
                    NetworkState.of("value", self.value_fn.net, None, self.value_fn.conditioned)]
        if self.posterior is not None:
            networks.append(NetworkState.of("posterior", self.posterior.net, None, False))
        return LearnerState(tuple(self.tasks), tuple(networks))

    @classmethod
    def from_state(cls, variant: ModelVariant, state: LearnerState, n_slots: int = 3) -> "Learner":
        """Rebuild a learner from its checkpointed networks; optimizer moments start from zero."""
        try:
            p, d, v = state.network("policy"), state.network("discriminator"), state.network("value")
            q = state.network("posterior")
            model = ActionModel.Gaussian if p.log_std else ActionModel.Categorical
            policy = ConditionalPolicy(p.approximator(), model, p.log_std or None, p.conditioned, n_slots)
            head = AirlDiscriminator if variant.airl_head else PlainDiscriminator
            discriminator = head(d.approximator(), d.conditioned, n_slots)
            value_fn = ValueFunction(v.approximator(), v.conditioned, n_slots)
            posterior = None if q is None else PosteriorQ(q.approximator())
        except (AttributeError, DimensionError) as e:
            raise ConfigError(f"Checkpointed learner does not fit variant {variant.name}: {e}") from e
        return cls(variant, state.tasks, policy, discriminator, value_fn, posterior)


@dataclass
class TrainResult:
    records: list[MetricsRecord]
    checkpoint: Checkpoint
    learners: list[Learner] = field(default_factory=list)


def _expert_batches(env: Env, experts: Mapping, tasks: Sequence[TaskVariable],
                    groups: Sequence[Sequence[TaskVariable]], n_slots: int) -> list[TransitionBatch]:
    by_task = {}
    for key, trajectories in experts.items():
        index = key.index if isinstance(key, TaskVariable) else int(key)
        by_task[index] = list(trajectories)
    for task in tasks:
        if not by_task.get(task.index):
            raise ConfigError(f"No expert trajectories for task {task}")
    batches = []
    for group in groups:
        batch = transitions(env, [t for task in group for t in by_task[task.index]], n_slots)
        if len(batch) == 0:
            raise ConfigError(f"Expert trajectories for {[str(t) for t in group]} contain no steps")
        batches.append(batch)
    return batches


def train(cfg: TrainConfig, experts: Mapping[TaskVariable | int, Sequence[Trajectory]],
          env: Env | None = None) -> TrainResult:
    """Run the adversarial training loop.

    Parameters
    ----------
    cfg - Run settings.
    experts - Expert trajectories keyed by task (or task index), for every active task.
    env - The world, built from ``cfg`` when None.

    Separate single-task models train one learner per task in lockstep under the same
    epoch budget; every other variant trains one learner on all tasks.

    Raises
    ------
    ConfigError when expert data is missing for an active task.

    """
    env = make_env(cfg) if env is None else env
    tasks = cfg.tasks
    groups = [[t] for t in tasks] if cfg.variant.per_task_learners else [tasks]
    expert_batches = _expert_batches(env, experts, tasks, groups, cfg.n_slots)
    learners = [Learner.build(cfg.variant, env, group, n_slots=cfg.n_slots, hidden_layers=cfg.hidden_layers,
                              seed=[cfg.seed, k]) for k, group in enumerate(groups)]
    owner = {task.index: learner for learner in learners for task in learner.tasks}

    records = []
    for epoch in range(cfg.epochs):
        beta = beta_at(cfg.beta, epoch) if cfg.variant.erc else 0.0
        stats = [learner.run_epoch(env, batch, beta, cfg) for learner, batch in zip(learners, expert_batches)]
        d_loss = float(np.mean([s.d_loss for s in stats]))
        v_loss = float(np.mean([s.v_loss for s in stats]))
        gain = float(np.mean([s.surrogate_gain for s in stats]))
        logger.debug("epoch %d beta %.3f d_loss %.4f v_loss %.4f gain %.4g", epoch, beta, d_loss, v_loss, gain)
        if epoch % cfg.eval_interval == 0 or epoch == cfg.epochs - 1:
            successes = tuple(owner[task.index].evaluate(env, task, cfg, epoch) for task in tasks)
            records.append(MetricsRecord(epoch, beta, d_loss, v_loss, gain, successes))
            logger.info("%s seed %d epoch %d: beta %.3f d_loss %.4f v_loss %.4f successes %s",
                        cfg.variant.name, cfg.seed, epoch, beta, d_loss, v_loss, successes)

    checkpoint = Checkpoint(cfg.variant.name, cfg.env, cfg.n_slots, tuple(learner.state() for learner in learners))
    return TrainResult(records, checkpoint, learners)


def load_learners(checkpoint: Checkpoint) -> list[Learner]:
    variant = ModelVariant.from_name(checkpoint.variant)
    return [Learner.from_state(variant, state, checkpoint.n_slots) for state in checkpoint.learners]
