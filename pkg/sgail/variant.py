"""Model variants compared in the experiments and the entropy-correction schedule.

"""
from dataclasses import dataclass
from typing import Any, Type, TypeVar

try:
    from typing import Self
except ImportError:
    Self = TypeVar("Self")

from .typus import Algorithm, BetaMode

__all__ = ["ConfigError", "ModelVariant", "BetaSchedule", "beta_at", "ERC_SUFFIX"]

ERC_SUFFIX = "+erc"


class ConfigError(ValueError):
    """Raised for unknown or inconsistent configuration.

    """
    pass


@dataclass(frozen=True)
class ModelVariant:
    """Which learner is trained and whether the entropy-regularization correction is on.

    Parameters
    ----------
    algorithm - The learner.
    erc - Whether β follows the schedule; without it β is 0.
    info_lambda1 - Entropy weight of the plain InfoGAIL discriminator reward.
    info_lambda2 - Weight of log Q(c|s, a) added to the reward of the InfoGAIL variants.

    Examples
    --------
    >>> v = ModelVariant.from_name("infogail+airl+erc")
    >>> v.algorithm.value, v.erc, v.name
    ('infogail+airl', True, 'infogail+airl+erc')

    """

    algorithm: Algorithm
    erc: bool = False
    info_lambda1: float = 1.0
    info_lambda2: float = 0.1

    ser_identifier = "ModelVariant"

    def __post_init__(self):
        try:
            object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        except ValueError as e:
            raise ConfigError(f"Unknown algorithm {self.algorithm!r}") from e
        if self.info_lambda1 < 0 or self.info_lambda2 < 0:
            raise ConfigError("InfoGAIL weights must be non-negative")

    @classmethod
    def from_name(cls, name: str, **kwargs) -> "ModelVariant":
        base, erc = (name[:-len(ERC_SUFFIX)], True) if name.endswith(ERC_SUFFIX) else (name, False)
        return cls(base, erc, **kwargs)

    @property
    def name(self) -> str:
        return self.algorithm.value + (ERC_SUFFIX if self.erc else "")

    @property
    def policy_conditioned(self) -> bool:
        return self.algorithm != Algorithm.AIRLSingleTask

    @property
    def discriminator_conditioned(self) -> bool:
        return self.algorithm == Algorithm.SGAIL

    @property
    def value_conditioned(self) -> bool:
        return self.algorithm == Algorithm.SGAIL

    @property
    def airl_head(self) -> bool:
        return self.algorithm != Algorithm.InfoGAIL

    @property
    def uses_posterior(self) -> bool:
        return self.algorithm in (Algorithm.InfoGAIL, Algorithm.InfoGAILplusAIRL)

    @property
    def per_task_learners(self) -> bool:
        return self.algorithm == Algorithm.AIRLSingleTask

    def serialize(self) -> tuple[str, dict[str, Any]]:
        return self.ser_identifier, dict(algorithm=self.algorithm.value, erc=self.erc,
                                         info_lambda1=self.info_lambda1, info_lambda2=self.info_lambda2)

    @classmethod
    def deserialize(cls: Type[Self], d: dict[str, Any], **_) -> Self:
        return cls(**d)


@dataclass(frozen=True)
class BetaSchedule:
    """Entropy-correction coefficient β over the epochs.

    Parameters
    ----------
    start - β at epoch 0.
    end - β from ``span`` epochs on; equals ``start`` for a constant schedule.
    mode - Constant or linear ramp.
    span - Length of the linear ramp in epochs.

    """

    start: float = 0.9
    end: float | None = None
    mode: BetaMode = BetaMode.Constant
    span: int = 1

    ser_identifier = "BetaSchedule"

    def __post_init__(self):
        object.__setattr__(self, "mode", BetaMode(self.mode))
        if self.end is None:
            object.__setattr__(self, "end", self.start)
        if not (0.0 <= self.start <= 1.0 and 0.0 <= self.end <= 1.0):
            raise ConfigError(f"β must stay in [0, 1], got {self.start} -> {self.end}")
        if self.mode == BetaMode.Constant and self.start != self.end:
            raise ConfigError("A constant β schedule needs start == end")
        if self.span < 1:
            raise ConfigError(f"β ramp span must be at least one epoch, got {self.span}")

    @classmethod
    def constant(cls, beta: float) -> "BetaSchedule":
        return cls(beta, beta, BetaMode.Constant)

    @classmethod
    def linear(cls, start: float, end: float, span: int) -> "BetaSchedule":
        return cls(start, end, BetaMode.Linear, span)

    @property
    def label(self) -> str:
        if self.mode == BetaMode.Constant:
            return f"beta{self.start:g}"
        return f"beta{self.start:g}-{self.end:g}"

    def serialize(self) -> tuple[str, dict[str, Any]]:
        return self.ser_identifier, dict(start=self.start, end=self.end, mode=self.mode.value, span=self.span)

    @classmethod
    def deserialize(cls: Type[Self], d: dict[str, Any], **_) -> Self:
        return cls(**d)


def beta_at(schedule: BetaSchedule, epoch: int) -> float:
    """β at an epoch: the start value for constant schedules, a linear ramp held at its end otherwise.

    Examples
    --------
    >>> beta_at(BetaSchedule.linear(0.9, 0.6, 100), 50)
    0.75

    """
    if epoch < 0:
        raise ValueError(f"Negative epoch {epoch}")
    if schedule.mode == BetaMode.Constant:
        return schedule.start
    frac = min(epoch / schedule.span, 1.0)
    return schedule.start * (1.0 - frac) + schedule.end * frac
