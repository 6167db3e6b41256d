"""The 11 x 11 puddle grid world.

Layout files are plain text, one row per line with the top line being the highest y.
'.' is a free cell, '#' a puddle, and the digits '1', '2', ... mark the goal of
task 1, task 2, ...

"""
from collections import deque
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .task import TaskVariable
from .typus import Direction

__all__ = ["GridCell", "GridWorld", "LayoutError", "ActionError", "InvalidStateError", "grid_step", "action_vector",
           "default_grid_world", "DEFAULT_LAYOUT"]

GridCell = tuple[int, int]

DEFAULT_LAYOUT = files("sgail").joinpath("data", "default_layout.txt")

_MOVES = tuple(d.delta for d in Direction)


class LayoutError(ValueError):
    """Raised for malformed layouts, goals placed on puddles, or free cells cut off from a goal.

    """
    pass


class ActionError(ValueError):
    """Raised when a grid action is not a one-hot vector over the four directions.

    """
    pass


class InvalidStateError(ValueError):
    """Raised when a state lies off the grid or on a puddle.

    """
    pass


@dataclass(frozen=True)
class GridWorld:
    """A deterministic grid with impassable puddles and one goal cell per task.

    Parameters
    ----------
    puddles - Cells the agent can never occupy.
    goals - Goal cell of each task, task 1 first.
    horizon - Maximum number of steps per episode.
    width, height - Grid size.

    Raises
    ------
    LayoutError if a goal is on a puddle or off the grid, or if some free cell has no
    path to some goal.

    """

    puddles: frozenset[GridCell] = field(default_factory=frozenset)
    goals: tuple[GridCell, ...] = ((0, 0), (10, 10))
    horizon: int = 60
    width: int = 11
    height: int = 11

    def __post_init__(self):
        object.__setattr__(self, "puddles", frozenset((int(x), int(y)) for x, y in self.puddles))
        object.__setattr__(self, "goals", tuple((int(x), int(y)) for x, y in self.goals))
        if self.horizon < 0 or self.width < 1 or self.height < 1:
            raise LayoutError(f"Invalid grid size {self.width}x{self.height} or horizon {self.horizon}")
        for goal in self.goals:
            if not self.is_free(goal):
                raise LayoutError(f"Goal {goal} is off the grid or on a puddle")
        free = set(self.free_cells)
        for goal in self.goals:
            reached = self._flood(goal)
            if reached != free:
                cut_off = sorted(free - reached)[:3]
                raise LayoutError(f"Cells {cut_off} have no path to goal {goal}")

    @classmethod
    def from_layout(cls, text: str, horizon: int = 60) -> "GridWorld":
        """Parse the layout text format.

        Examples
        --------
        >>> world = GridWorld.from_layout("..2\\n.#.\\n1..")
        >>> world.goals, sorted(world.puddles)
        (((0, 0), (2, 2)), [(1, 1)])

        """
        rows = [line.strip() for line in text.splitlines() if line.strip()]
        if not rows or len({len(r) for r in rows}) != 1:
            raise LayoutError("Layout rows must be non-empty and of equal length")
        height, width = len(rows), len(rows[0])
        puddles, goals = set(), {}
        for i, row in enumerate(rows):
            y = height - 1 - i
            for x, char in enumerate(row):
                if char == '#':
                    puddles.add((x, y))
                elif char.isdigit() and char != '0':
                    if int(char) in goals:
                        raise LayoutError(f"Goal {char} appears twice")
                    goals[int(char)] = (x, y)
                elif char != '.':
                    raise LayoutError(f"Unknown layout character {char!r}")
        if sorted(goals) != list(range(1, len(goals) + 1)):
            raise LayoutError(f"Goals must be numbered 1..n, got {sorted(goals)}")
        return cls(frozenset(puddles), tuple(goals[k] for k in sorted(goals)), horizon, width, height)

    @classmethod
    def load(cls, path: str | Path, horizon: int = 60) -> "GridWorld":
        return cls.from_layout(Path(path).read_text(), horizon)

    def to_layout(self) -> str:
        marks = {goal: str(k + 1) for k, goal in enumerate(self.goals)}
        lines = []
        for y in reversed(range(self.height)):
            lines.append("".join('#' if (x, y) in self.puddles else marks.get((x, y), '.')
                                 for x in range(self.width)))
        return "\n".join(lines) + "\n"

    def in_bounds(self, cell: GridCell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def is_free(self, cell: GridCell) -> bool:
        return self.in_bounds(cell) and tuple(cell) not in self.puddles

    @property
    def free_cells(self) -> list[GridCell]:
        return [(x, y) for y in range(self.height) for x in range(self.width) if (x, y) not in self.puddles]

    def start_cells(self, exclude: Iterable[GridCell] | None = None) -> list[GridCell]:
        """Free cells that are not goals (or not in ``exclude`` when given)."""
        excluded = set(self.goals if exclude is None else exclude)
        return [cell for cell in self.free_cells if cell not in excluded]

    def goal(self, task: TaskVariable) -> GridCell:
        return self.goals[task.index]

    def move(self, cell: GridCell, direction: int) -> GridCell:
        """Cell reached by moving in a direction; blocked moves stay in place."""
        dx, dy = _MOVES[direction]
        target = (cell[0] + dx, cell[1] + dy)
        return target if self.is_free(target) else tuple(cell)

    def neighbours(self, cell: GridCell) -> list[tuple[int, GridCell]]:
        """(direction index, cell) pairs of the moves that leave the cell, in priority order."""
        return [(d, n) for d in range(len(_MOVES)) if (n := self.move(cell, d)) != tuple(cell)]

    def distances_to(self, goal: GridCell) -> dict[GridCell, int]:
        """Breadth-first step counts from every free cell to a goal."""
        distances = {goal: 0}
        frontier = deque([goal])
        while frontier:
            cell = frontier.popleft()
            for _, n in self.neighbours(cell):
                if n not in distances:
                    distances[n] = distances[cell] + 1
                    frontier.append(n)
        return distances

    def _flood(self, origin: GridCell) -> set[GridCell]:
        return set(self.distances_to(origin))


def action_vector(direction: Direction | int) -> np.ndarray:
    index = direction.index if isinstance(direction, Direction) else int(direction)
    v = np.zeros(len(_MOVES))
    v[index] = 1.0
    return v


def _direction_of(action) -> int:
    a = np.asarray(action, dtype=np.float64)
    if a.shape != (len(_MOVES),) or np.count_nonzero(a) != 1 or np.count_nonzero(a == 1.0) != 1:
        raise ActionError(f"Grid actions are one-hot vectors of length {len(_MOVES)}, got {action}")
    return int(np.argmax(a))


def grid_step(world: GridWorld, s: GridCell | Sequence[float], a) -> GridCell:
    """Deterministic transition; moves into puddles or off the grid leave the agent in place.

    Raises
    ------
    InvalidStateError if ``s`` is not a free cell.
    ActionError if ``a`` is not one-hot.

    """
    cell = (int(round(s[0])), int(round(s[1])))
    if not world.is_free(cell):
        raise InvalidStateError(f"{cell} is not a free cell")
    return world.move(cell, _direction_of(a))


def default_grid_world(horizon: int = 60) -> GridWorld:
    return GridWorld.from_layout(DEFAULT_LAYOUT.read_text(), horizon)
