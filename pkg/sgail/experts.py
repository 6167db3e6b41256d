"""Scripted experts producing the demonstration sets.

"""
from typing import Sequence

import numpy as np

from .grid_world import GridCell, GridWorld
from .models import Categorical, PointMass
from .reacher import ReacherWorld, inverse_kinematics, joint_angles, make_state, wrap_angle
from .rollout import as_rng, rollout
from .task import TaskVariable, Trajectory

__all__ = ["UnreachableGoalError", "ExpertFailureError", "GridExpertPolicy", "ReacherExpertPolicy", "expert_grid",
           "expert_reacher"]


class UnreachableGoalError(RuntimeError):
    pass


class ExpertFailureError(RuntimeError):
    """Raised when the reacher controller does not reach the target within the horizon,
    which means the world configuration is too tight for it.

    """
    pass


class GridExpertPolicy:
    """Shortest-path expert: always moves to a neighbour one step closer to the goal.

    Among equally short moves the first in (right, up, left, down) order is taken, so the
    demonstrations are reproducible.

    """

    def __init__(self, world: GridWorld):
        self.world = world
        self._distances = {goal: world.distances_to(goal) for goal in world.goals}

    def direction(self, cell: GridCell, task: TaskVariable) -> int:
        goal = self.world.goal(task)
        distances = self._distances[goal]
        if cell not in distances:
            raise UnreachableGoalError(f"No path from {cell} to {goal}")
        d = distances[cell]
        for direction, n in self.world.neighbours(cell):
            if distances[n] == d - 1:
                return direction
        return 0

    def __call__(self, state, task: TaskVariable) -> Categorical:
        cell = (int(round(state[0])), int(round(state[1])))
        return Categorical.one_hot(self.direction(cell, task), 4)


def expert_grid(world: GridWorld, task: TaskVariable, n: int, rng_seed, *,
                starts: Sequence[GridCell] | None = None) -> list[Trajectory]:
    """Shortest-path demonstrations from uniformly sampled free non-goal cells.

    Parameters
    ----------
    world - The grid.
    task - Task whose goal the expert heads for.
    n - Number of trajectories.
    rng_seed - Seed or generator for the start cells.
    starts - Explicit start cells, one per trajectory, instead of sampled ones.

    Raises
    ------
    UnreachableGoalError if the goal cannot be reached from a start.

    """
    if n < 0:
        raise ValueError(f"Negative demonstration count {n}")
    rng = as_rng(rng_seed)
    expert = GridExpertPolicy(world)
    if starts is None:
        cells = world.start_cells()
        starts = [cells[i] for i in rng.integers(len(cells), size=n)]
    trajectories = []
    for start in list(starts)[:n]:
        traj = rollout(world, expert, task, rng, start=np.array(start, dtype=np.float64), greedy=True)
        if not traj.terminal:
            raise UnreachableGoalError(f"Expert did not reach {world.goal(task)} from {start} within the horizon")
        trajectories.append(traj)
    return trajectories


class ReacherExpertPolicy:
    """Joint-space controller driving the arm to an inverse-kinematics solution of the target.

    Each joint tracks the velocity profile sign(e) min(v_max, sqrt(2 a |e|), k_p |e|) on its
    wrapped angle error e, with the torque clamped to the world's limit. Of the two elbow
    solutions the one needing the least joint travel is chosen at every step.

    Parameters
    ----------
    world - The arm.
    acceleration - Deceleration a the profile plans with, rad/s².
    velocity_gain - Proportional gain from velocity error to torque.
    position_gain - Slope k_p of the profile close to the target.

    """

    def __init__(self, world: ReacherWorld, acceleration: float = 1.0, velocity_gain: float = 50.0,
                 position_gain: float = 5.0):
        self.world = world
        self.acceleration = acceleration
        self.velocity_gain = velocity_gain
        self.position_gain = position_gain
        self._solutions = [inverse_kinematics(world, target) for target in world.targets]

    def joint_error(self, state, task: TaskVariable) -> np.ndarray:
        theta = joint_angles(np.asarray(state))
        errors = [wrap_angle(q - theta) for q in self._solutions[task.index]]
        return min(errors, key=lambda e: float(np.max(np.abs(e))))

    def __call__(self, state, task: TaskVariable) -> PointMass:
        w = self.world
        e = self.joint_error(state, task)
        speed = np.minimum.reduce([np.full(2, w.velocity_limit), np.sqrt(2 * self.acceleration * np.abs(e)),
                                   self.position_gain * np.abs(e)])
        velocity = np.asarray(state)[4:]
        torque = w.inertia * self.velocity_gain * (np.sign(e) * speed - velocity) + w.inertia * w.damping * velocity
        return PointMass(np.clip(torque, -w.torque_limit, w.torque_limit))


def expert_reacher(world: ReacherWorld, task: TaskVariable, n: int, rng_seed) -> list[Trajectory]:
    """Demonstrations from θ1 uniform over the initial range and θ2 = 0.

    Raises
    ------
    ExpertFailureError if a demonstration does not end inside the success radius.

    """
    if n < 0:
        raise ValueError(f"Negative demonstration count {n}")
    rng = as_rng(rng_seed)
    expert = ReacherExpertPolicy(world)
    low, high = world.initial_theta1
    trajectories = []
    for theta1 in rng.uniform(low, high, size=n):
        traj = rollout(world, expert, task, rng, start=make_state((theta1, 0.0)), greedy=True)
        if not traj.terminal:
            raise ExpertFailureError(f"Expert missed target {world.targets[task.index]} from θ1 = {theta1:.3f}")
        trajectories.append(traj)
    return trajectories
