"""Rollout and evaluation, written once for both worlds.

The environment primitives dispatch on the world type, so adding a world means
registering ``reset``, ``observe``, ``step_env``, ``is_success`` and the dimension
queries for it.

"""
from typing import Callable, Sequence

import numpy as np
from multipledispatch import dispatch

from .grid_world import GridWorld, grid_step
from .models import ActionDistribution, ConditionalPolicy, InvalidDistributionError
from .reacher import ReacherWorld, make_state, reacher_step
from .task import TaskVariable, Trajectory
from .typus import ActionModel

__all__ = ["Env", "Policy", "FeaturePolicy", "reset", "observe", "step_env", "is_success", "state_dim",
           "action_dim", "action_model", "horizon", "start_states", "rollout", "evaluate", "as_rng"]

Env = GridWorld | ReacherWorld
Policy = Callable[[np.ndarray, TaskVariable], ActionDistribution]


def as_rng(rng_seed) -> np.random.Generator:
    if isinstance(rng_seed, np.random.Generator):
        return rng_seed
    return np.random.default_rng(rng_seed)


@dispatch(GridWorld, TaskVariable, np.random.Generator)
def reset(world, task, rng):
    """Uniformly random free cell that is not a goal."""
    cells = world.start_cells()
    return np.array(cells[rng.integers(len(cells))], dtype=np.float64)


@dispatch(ReacherWorld, TaskVariable, np.random.Generator)
def reset(world, task, rng):  # noqa: F811
    """θ1 uniform over the configured range, θ2 = 0, at rest."""
    low, high = world.initial_theta1
    return make_state((rng.uniform(low, high), 0.0))


@dispatch(GridWorld, object)
def observe(world, state):
    """Grid coordinates scaled to [0, 1]."""
    return np.asarray(state, dtype=np.float64) / np.array([world.width - 1, world.height - 1], dtype=np.float64)


@dispatch(ReacherWorld, object)
def observe(world, state):  # noqa: F811
    return np.asarray(state, dtype=np.float64)


@dispatch(GridWorld, object, object)
def step_env(world, state, action):
    return np.array(grid_step(world, state, action), dtype=np.float64)


@dispatch(ReacherWorld, object, object)
def step_env(world, state, action):  # noqa: F811
    return reacher_step(world, state, action)


@dispatch(GridWorld, object, TaskVariable)
def is_success(world, state, task):
    return tuple(int(round(v)) for v in state[:2]) == world.goal(task)


@dispatch(ReacherWorld, object, TaskVariable)
def is_success(world, state, task):  # noqa: F811
    return world.distance_to_target(state, task) <= world.success_radius


@dispatch(GridWorld)
def state_dim(world):
    return 2


@dispatch(ReacherWorld)
def state_dim(world):  # noqa: F811
    return 6


@dispatch(GridWorld)
def action_dim(world):
    return 4


@dispatch(ReacherWorld)
def action_dim(world):  # noqa: F811
    return 2


@dispatch(GridWorld)
def action_model(world):
    return ActionModel.Categorical


@dispatch(ReacherWorld)
def action_model(world):  # noqa: F811
    return ActionModel.Gaussian


def horizon(world: Env) -> int:
    return world.horizon


@dispatch(GridWorld, TaskVariable)
def start_states(world, task):
    """Every free cell except the goal of the task."""
    return [np.array(c, dtype=np.float64) for c in world.start_cells(exclude=[world.goal(task)])]


class FeaturePolicy:
    """Adapts a :class:`ConditionalPolicy` over observed features to raw environment states."""

    def __init__(self, world: Env, policy: ConditionalPolicy):
        self.world = world
        self.policy = policy

    def __call__(self, state, task: TaskVariable) -> ActionDistribution:
        return self.policy.distribution(observe(self.world, state), task)


def _checked(dist) -> ActionDistribution:
    if not isinstance(dist, ActionDistribution):
        raise InvalidDistributionError(f"Policy returned {type(dist).__name__}, not an action distribution")
    dist.validate()
    return dist


def rollout(env: Env, policy: Policy, task: TaskVariable, rng_seed, *, start=None,
            greedy: bool = False) -> Trajectory:
    """Run one episode until the task succeeds or the horizon is used up.

    Parameters
    ----------
    env - The world.
    policy - Callable (state, task) -> action distribution.
    task - Task variable of the episode.
    rng_seed - Seed or generator; the start state and sampled actions draw from it.
    start - Initial state, drawn with :func:`reset` when None.
    greedy - Take the mode of each distribution instead of sampling.

    Raises
    ------
    InvalidDistributionError when the policy returns an invalid distribution.

    """
    rng = as_rng(rng_seed)
    state = reset(env, task, rng) if start is None else np.asarray(start, dtype=np.float64)
    states, actions = [state], []
    for _ in range(horizon(env)):
        if is_success(env, state, task):
            break
        dist = _checked(policy(state, task))
        action = dist.mode() if greedy else dist.sample(rng)
        state = step_env(env, state, action)
        actions.append(action)
        states.append(state)
    return Trajectory(task, states, actions, is_success(env, state, task))


def evaluate(env: Env, policy: Policy, task: TaskVariable, n_trials: int, rng_seed, *,
             starts: Sequence | None = None, greedy: bool = True) -> int:
    """Number of successful episodes out of ``n_trials``.

    Trial i starts from ``starts[i % len(starts)]`` when starts are given, from a random
    start otherwise.

    """
    if n_trials < 0:
        raise ValueError(f"Negative trial count {n_trials}")
    rng = as_rng(rng_seed)
    successes = 0
    for i in range(n_trials):
        start = None if not starts else starts[i % len(starts)]
        successes += rollout(env, policy, task, rng, start=start, greedy=greedy).terminal
    return successes
