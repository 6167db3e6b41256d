"""Submodule for the closed vocabularies used across the package.

"""
from enum import Enum

__all__ = ["Algorithm", "Activation", "OutputHead", "ActionModel", "BetaMode", "EnvId", "ExperimentId", "Direction"]


class Algorithm(str, Enum):
    """Typus enum for the learners compared in the experiments.

    """

    SGAIL = 'sgail'
    InfoGAIL = 'infogail'
    InfoGAILplusAIRL = 'infogail+airl'
    AIRLSingleTask = 'airl'


class Activation(str, Enum):
    """Hidden-layer nonlinearities an approximator can use.

    """

    LeakyRelu = 'leaky-relu'


class OutputHead(str, Enum):
    """What the last affine layer of an approximator is followed by.

    """

    Linear = 'linear'
    Softmax = 'softmax'


class ActionModel(str, Enum):
    """Action distribution family of a conditional policy.

    """

    Categorical = 'categorical'
    Gaussian = 'gaussian'


class BetaMode(str, Enum):
    Constant = 'constant'
    Linear = 'linear'


class EnvId(str, Enum):
    Grid = 'grid'
    Reacher = 'reacher'


class ExperimentId(str, Enum):
    """Experiment designs the driver knows how to run.

    """

    GridVariants = 'grid-variants'
    GridErc = 'grid-erc'
    GridSingleVsMulti = 'grid-singleVsMulti'
    Reacher = 'reacher'


class Direction(str, Enum):
    """Grid moves, in one-hot slot order. The declaration order is also the
    tie-breaking priority of the shortest-path expert.

    """

    Right = 'right'
    Up = 'up'
    Left = 'left'
    Down = 'down'

    @property
    def index(self) -> int:
        return list(Direction).index(self)

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]


_DELTAS = {
    Direction.Right: (1, 0),
    Direction.Up: (0, 1),
    Direction.Left: (-1, 0),
    Direction.Down: (0, -1),
}
