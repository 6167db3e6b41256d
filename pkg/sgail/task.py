"""Task variables and trajectories, the data both environments produce.

"""
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np
import pandas as pd

__all__ = ["TaskVariable", "Trajectory", "TrajectoryChainError", "trajectories_to_csv", "trajectories_from_csv"]


class TrajectoryChainError(ValueError):
    """Raised when the next state of a step differs from the state of the step after it.

    """
    pass


@dataclass(frozen=True, order=True)
class TaskVariable:
    """One-hot code selecting a task.

    Parameters
    ----------
    index - Hot slot, counted from 0. Task 1 of the experiments is index 0.
    n_slots - Length of the code. Experiments carry 3 slots for 2 tasks, the third
              slot is never hot.

    Examples
    --------
    >>> TaskVariable(1).vector
    array([0., 1., 0.])

    """

    index: int
    n_slots: int = 3

    def __post_init__(self):
        if self.n_slots < 1 or not 0 <= self.index < self.n_slots:
            raise ValueError(f"Task index {self.index} does not fit a code of length {self.n_slots}")

    @property
    def vector(self) -> np.ndarray:
        v = np.zeros(self.n_slots)
        v[self.index] = 1.0
        return v

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "TaskVariable":
        v = np.asarray(vector, dtype=np.float64)
        hot = np.flatnonzero(v == 1.0)
        if v.ndim != 1 or hot.size != 1 or np.count_nonzero(v) != 1:
            raise ValueError(f"Not a one-hot task code: {vector}")
        return cls(int(hot[0]), v.shape[0])

    def __str__(self) -> str:
        return f"c{self.index + 1}"


class Trajectory:
    """One episode: the visited states, the actions taken, and the task it was run under.

    Parameters
    ----------
    task - Task variable the episode was generated for.
    states - States s_0 ... s_T, one row each.
    actions - Actions a_0 ... a_{T-1}, one row each.
    terminal - Whether the episode ended by reaching the goal (or the reacher
               success region) rather than by running out of horizon.

    The chaining invariant (next state of step t is the state of step t+1) holds by
    construction; :meth:`from_steps` checks it for step-wise input.

    """

    def __init__(self, task: TaskVariable, states, actions, terminal: bool):
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.asarray(actions, dtype=np.float64)
        if actions.ndim != 2:
            actions = actions.reshape(actions.shape[0], -1) if actions.size else actions.reshape(0, 0)
        if states.shape[0] != actions.shape[0] + 1:
            raise TrajectoryChainError(f"{states.shape[0]} states cannot chain {actions.shape[0]} actions")
        self.task = task
        self.states = states
        self.actions = actions
        self.terminal = bool(terminal)

    @classmethod
    def from_steps(cls, task: TaskVariable, steps: Iterable[tuple], terminal: bool,
                   initial_state=None) -> "Trajectory":
        """Build a trajectory from (state, action, next_state) triples.

        Raises
        ------
        TrajectoryChainError if consecutive steps do not chain, or if there are no
        steps and no initial state.

        """
        steps = list(steps)
        if not steps:
            if initial_state is None:
                raise TrajectoryChainError("An empty trajectory needs its initial state")
            return cls(task, [initial_state], np.zeros((0, 0)), terminal)
        states = [np.asarray(steps[0][0], dtype=np.float64)]
        for t, (state, _, next_state) in enumerate(steps):
            if not np.array_equal(np.asarray(state, dtype=np.float64), states[-1]):
                raise TrajectoryChainError(f"Step {t} does not start where step {t - 1} ended")
            states.append(np.asarray(next_state, dtype=np.float64))
        return cls(task, states, [a for _, a, _ in steps], terminal)

    def steps(self) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        for t in range(len(self)):
            yield self.states[t], self.actions[t], self.states[t + 1]

    def __len__(self) -> int:
        return self.actions.shape[0]

    @property
    def initial_state(self) -> np.ndarray:
        return self.states[0]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def __eq__(self, other: "Trajectory"):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.task == other.task
                and self.terminal == other.terminal
                and np.array_equal(self.states, other.states)
                and np.array_equal(self.actions, other.actions))

    def __repr__(self) -> str:
        return f"Trajectory({self.task}, {len(self)} steps, terminal={self.terminal})"


def trajectories_to_csv(trajectories: Sequence[Trajectory], path: str | Path) -> None:
    """Write trajectories, one row per visited state.

    Columns are episode, t, s0..s{d-1}, a0..a{k-1}, task, terminal. The row of the
    final state of an episode has empty action fields.

    """
    rows = []
    for episode, traj in enumerate(trajectories):
        n_actions = traj.actions.shape[1] if len(traj) else 0
        for t, state in enumerate(traj.states):
            row = {"episode": episode, "t": t}
            row |= {f"s{i}": v for i, v in enumerate(state)}
            if t < len(traj):
                row |= {f"a{i}": v for i, v in enumerate(traj.actions[t])}
            elif n_actions:
                row |= {f"a{i}": np.nan for i in range(n_actions)}
            row |= {"task": traj.task.index, "n_slots": traj.task.n_slots, "terminal": int(traj.terminal)}
            rows.append(row)
    frame = pd.DataFrame(rows)
    leading = ["episode", "t"]
    states = sorted((c for c in frame.columns if c.startswith("s") and c[1:].isdigit()), key=lambda c: int(c[1:]))
    actions = sorted((c for c in frame.columns if c.startswith("a") and c[1:].isdigit()), key=lambda c: int(c[1:]))
    frame = frame[leading + states + actions + ["task", "n_slots", "terminal"]]
    frame.to_csv(path, index=False)


def trajectories_from_csv(path: str | Path) -> list[Trajectory]:
    frame = pd.read_csv(path, float_precision="round_trip")
    state_cols = [c for c in frame.columns if c.startswith("s") and c[1:].isdigit()]
    action_cols = [c for c in frame.columns if c.startswith("a") and c[1:].isdigit()]
    trajectories = []
    for _, episode in frame.groupby("episode", sort=True):
        episode = episode.sort_values("t")
        first = episode.iloc[0]
        task = TaskVariable(int(first["task"]), int(first["n_slots"]))
        states = episode[state_cols].to_numpy(dtype=np.float64)
        actions = episode[action_cols].to_numpy(dtype=np.float64)[:-1]
        trajectories.append(Trajectory(task, states, actions, bool(first["terminal"])))
    return trajectories
