"""Ground-truth computations for tests and diagnostics. The learners never use this module.

"""
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

from .grid_world import GridCell, GridWorld
from .task import TaskVariable

__all__ = ["ConvergenceError", "MalformedTableError", "TabularMDP", "SoftSolution", "soft_value_iteration",
           "soft_advantage", "value_iteration", "grid_mdp", "bfs_shortest_path", "mutual_information_exact",
           "uniform_policy_success_probability"]


class ConvergenceError(RuntimeError):
    pass


class MalformedTableError(ValueError):
    """Raised for probability tables with negative entries or rows that do not sum to one.

    """
    pass


@dataclass(frozen=True)
class TabularMDP:
    """Discounted MDP with an entropy-regularization weight.

    Parameters
    ----------
    transition - P[s, a, s'].
    reward - R[s, a].
    gamma - Discount in [0, 1).
    omega - Entropy weight ω > 0.

    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float = 0.95
    omega: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=np.float64)
        r = np.asarray(self.reward, dtype=np.float64)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)
        if p.ndim != 3 or p.shape[0] != p.shape[2] or r.shape != p.shape[:2]:
            raise MalformedTableError(f"Transition {p.shape} and reward {r.shape} do not describe one MDP")
        if np.any(p < 0) or not np.allclose(p.sum(axis=2), 1.0, rtol=0, atol=1e-12):
            raise MalformedTableError("Transition rows must be probability vectors")
        if not 0 <= self.gamma < 1 or self.omega <= 0:
            raise ValueError(f"Need gamma in [0, 1) and omega > 0, got {self.gamma}, {self.omega}")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def backup(self, v: np.ndarray) -> np.ndarray:
        """Q(s, a) = R(s, a) + γ Σ P(s'|s, a) V(s')."""
        return self.reward + self.gamma * self.transition @ v


@dataclass(frozen=True)
class SoftSolution:
    value: np.ndarray
    q: np.ndarray
    policy: np.ndarray
    iterations: int
    residual: float


def soft_value_iteration(m: TabularMDP, tol: float = 1e-12, max_iterations: int = 100_000) -> SoftSolution:
    """Fixed point of V(s) = ω log Σ_a exp(Q(s, a) / ω).

    Iterates until successive value functions differ by at most ``tol`` in max norm and
    returns V*, Q* and π*(a|s) = exp((Q* - V*) / ω).

    Raises
    ------
    ConvergenceError after ``max_iterations`` sweeps.

    """
    if tol <= 0:
        raise ValueError(f"Tolerance must be positive, got {tol}")
    v = np.zeros(m.n_states)
    for iteration in range(1, max_iterations + 1):
        v_new = m.omega * logsumexp(m.backup(v) / m.omega, axis=1)
        gap = float(np.max(np.abs(v_new - v)))
        v = v_new
        if gap <= tol:
            break
    else:
        raise ConvergenceError(f"Soft value iteration did not converge in {max_iterations} sweeps")
    q = m.backup(v)
    residual = float(np.max(np.abs(m.omega * logsumexp(q / m.omega, axis=1) - v)))
    return SoftSolution(v, q, np.exp((q - v[:, None]) / m.omega), iteration, residual)


def soft_advantage(value: np.ndarray, q: np.ndarray, omega: float = 1.0) -> np.ndarray:
    """A*(s, a) = Q*(s, a) - V*(s), which equals ω log π*(a|s) at the soft optimum."""
    return np.asarray(q) - np.asarray(value)[:, None]


def value_iteration(m: TabularMDP, tol: float = 1e-12, max_iterations: int = 100_000) -> tuple[np.ndarray, np.ndarray]:
    """Hard-max value iteration; returns V and Q."""
    v = np.zeros(m.n_states)
    for _ in range(max_iterations):
        v_new = m.backup(v).max(axis=1)
        if np.max(np.abs(v_new - v)) <= tol:
            return v_new, m.backup(v_new)
        v = v_new
    raise ConvergenceError(f"Value iteration did not converge in {max_iterations} sweeps")


def grid_mdp(world: GridWorld, task: TaskVariable, gamma: float = 0.95, omega: float = 1.0
             ) -> tuple[TabularMDP, list[GridCell]]:
    """Tabular form of the grid for one task: +1 for entering the goal, which is absorbing.

    Returns
    -------
    The MDP and the cell of every state index.

    """
    cells = world.free_cells
    index = {cell: i for i, cell in enumerate(cells)}
    goal = world.goal(task)
    n, n_actions = len(cells), 4
    transition = np.zeros((n, n_actions, n))
    reward = np.zeros((n, n_actions))
    for cell, i in index.items():
        for a in range(n_actions):
            if cell == goal:
                transition[i, a, i] = 1.0
                continue
            target = world.move(cell, a)
            transition[i, a, index[target]] = 1.0
            reward[i, a] = 1.0 if target == goal else 0.0
    return TabularMDP(transition, reward, gamma, omega), cells


def bfs_shortest_path(world: GridWorld, start: GridCell, goal: GridCell) -> tuple[int, list[GridCell]]:
    """Shortest path under the grid moves, first move in (right, up, left, down) order on ties.

    Raises
    ------
    ValueError if either cell is not free or the goal cannot be reached.

    """
    start, goal = tuple(start), tuple(goal)
    if not (world.is_free(start) and world.is_free(goal)):
        raise ValueError(f"{start} and {goal} must both be free cells")
    distance = {goal: 0}
    frontier = deque([goal])
    while frontier:
        cell = frontier.popleft()
        for direction in range(4):
            # moves are reversible, so a backward search can use forward neighbours
            n = world.move(cell, direction)
            if n not in distance:
                distance[n] = distance[cell] + 1
                frontier.append(n)
    if start not in distance:
        raise ValueError(f"{goal} is unreachable from {start}")
    path = [start]
    while path[-1] != goal:
        here = path[-1]
        path.append(next(n for n in (world.move(here, d) for d in range(4)) if distance.get(n) == distance[here] - 1))
    return distance[start], path


def mutual_information_exact(joint) -> float:
    """Σ p(c, x) log[p(c, x) / (p(c) p(x))] in nats, with 0 log 0 = 0.

    Examples
    --------
    >>> round(mutual_information_exact([[0.4, 0.1], [0.1, 0.4]]), 6)
    0.192745

    Raises
    ------
    MalformedTableError for negative entries or a total other than one.

    """
    p = np.asarray(joint, dtype=np.float64)
    if p.ndim != 2 or np.any(p < 0) or not np.all(np.isfinite(p)) or abs(p.sum() - 1.0) > 1e-12:
        raise MalformedTableError("The joint table must be a 2-D probability table")
    pc = p.sum(axis=1, keepdims=True)
    px = p.sum(axis=0, keepdims=True)
    return float(np.sum(xlogy(p, p) - xlogy(p, pc * px)))


def uniform_policy_success_probability(world: GridWorld, task: TaskVariable, start: GridCell,
                                       horizon: int | None = None) -> float:
    """Exact probability that a uniformly random walk from ``start`` enters the goal within the horizon."""
    horizon = world.horizon if horizon is None else horizon
    cells = world.free_cells
    index = {cell: i for i, cell in enumerate(cells)}
    goal = index[world.goal(task)]
    moves = np.array([[index[world.move(cell, a)] for a in range(4)] for cell in cells])
    p = np.zeros(len(cells))
    p[goal] = 1.0
    for _ in range(horizon):
        p = p[moves].mean(axis=1)
        p[goal] = 1.0
    return float(p[index[tuple(start)]])
