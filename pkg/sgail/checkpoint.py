"""Checkpoint files: a magic header line followed by the ramp-core JSON of a :class:`Checkpoint`.

"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Type, TypeVar

try:
    from typing import Self
except ImportError:
    Self = TypeVar("Self")

import numpy as np
from ramp_core import RampJSONDecoder, RampJSONEncoder
from ramp_core.serializable import Serializable, deserialize_default

from .approximator import Approximator, ApproximatorSpec
from .task import TaskVariable
from .typus import EnvId

__all__ = ["MAGIC", "CheckpointFormatError", "NetworkState", "LearnerState", "Checkpoint", "save_checkpoint",
           "load_checkpoint"]

MAGIC = "SGAIL1"


class CheckpointFormatError(ValueError):
    """Raised for files without the checkpoint header, or whose networks do not fit their specs.

    """
    pass


@dataclass(frozen=True)
class NetworkState:
    """Snapshot of one network.

    Parameters
    ----------
    role - "policy", "discriminator", "value" or "posterior".
    spec - Shape of the approximator.
    params - Flat approximator parameters.
    log_std - Gaussian log-stddev of a policy, empty otherwise.
    conditioned - Whether the network reads the task code.

    """

    role: str
    spec: ApproximatorSpec
    params: tuple[float, ...]
    log_std: tuple[float, ...] = ()
    conditioned: bool = True

    ser_identifier = "NetworkState"

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "log_std", tuple(float(p) for p in self.log_std))
        if len(self.params) != self.spec.n_params:
            raise CheckpointFormatError(f"Network {self.role!r} holds {len(self.params)} parameters, "
                                        f"its spec needs {self.spec.n_params}")

    @classmethod
    def of(cls, role: str, net: Approximator, log_std=None, conditioned: bool = True) -> "NetworkState":
        return cls(role, net.spec, tuple(net.get_params()), () if log_std is None else tuple(log_std), conditioned)

    def approximator(self) -> Approximator:
        return Approximator(self.spec, np.array(self.params))

    def serialize(self) -> tuple[str, dict[str, Any]]:
        return self.ser_identifier, dict(role=self.role,
                                         spec=self.spec.serialize(),
                                         params=list(self.params),
                                         log_std=list(self.log_std),
                                         conditioned=self.conditioned)

    @classmethod
    def deserialize(cls: Type[Self], d: dict[str, Any], *, supported: dict[str, Type[Serializable]]) -> Self:
        return cls(role=d["role"],
                   spec=deserialize_default(d["spec"], supported=supported, default=ApproximatorSpec),
                   params=tuple(d["params"]),
                   log_std=tuple(d["log_std"]),
                   conditioned=bool(d["conditioned"]))


@dataclass(frozen=True)
class LearnerState:
    """The networks of one learner and the tasks it was trained on."""

    tasks: tuple[TaskVariable, ...]
    networks: tuple[NetworkState, ...]

    ser_identifier = "LearnerState"

    def network(self, role: str) -> NetworkState | None:
        return next((n for n in self.networks if n.role == role), None)

    def serialize(self) -> tuple[str, dict[str, Any]]:
        return self.ser_identifier, dict(tasks=[[t.index, t.n_slots] for t in self.tasks],
                                         networks=[n.serialize() for n in self.networks])

    @classmethod
    def deserialize(cls: Type[Self], d: dict[str, Any], *, supported: dict[str, Type[Serializable]]) -> Self:
        return cls(tasks=tuple(TaskVariable(i, k) for i, k in d["tasks"]),
                   networks=tuple(deserialize_default(n, supported=supported, default=NetworkState)
                                  for n in d["networks"]))


@dataclass(frozen=True)
class Checkpoint:
    """Everything needed to evaluate a trained model again.

    Parameters
    ----------
    variant - Name of the model variant, e.g. "sgail+erc".
    env_id - World the learners were trained in.
    n_slots - Length of the task codes.
    learners - One state per learner; separate single-task models have one each.

    """

    variant: str
    env_id: EnvId
    n_slots: int = 3
    learners: tuple[LearnerState, ...] = field(default_factory=tuple)

    ser_identifier = "Checkpoint"

    def __post_init__(self):
        object.__setattr__(self, "env_id", EnvId(self.env_id))
        object.__setattr__(self, "learners", tuple(self.learners))

    def serialize(self) -> tuple[str, dict[str, Any]]:
        return self.ser_identifier, dict(variant=self.variant,
                                         env_id=self.env_id.value,
                                         n_slots=self.n_slots,
                                         learners=[learner.serialize() for learner in self.learners])

    @classmethod
    def deserialize(cls: Type[Self], d: dict[str, Any], *, supported: dict[str, Type[Serializable]]) -> Self:
        return cls(variant=d["variant"],
                   env_id=EnvId(d["env_id"]),
                   n_slots=int(d["n_slots"]),
                   learners=tuple(deserialize_default(learner, supported=supported, default=LearnerState)
                                  for learner in d["learners"]))


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> None:
    Path(path).write_text(MAGIC + "\n" + json.dumps(checkpoint, cls=RampJSONEncoder))


def load_checkpoint(path: str | Path) -> Checkpoint:
    """Read a checkpoint file.

    Raises
    ------
    CheckpointFormatError for a missing magic header or a body that is not a checkpoint.

    """
    text = Path(path).read_text()
    header, _, body = text.partition("\n")
    if header.strip() != MAGIC:
        raise CheckpointFormatError(f"{path} does not start with the {MAGIC} header")
    try:
        checkpoint = json.loads(body, cls=RampJSONDecoder)
    except (ValueError, KeyError, TypeError, AttributeError) as e:
        raise CheckpointFormatError(f"{path} has a malformed body: {e}") from e
    if not isinstance(checkpoint, Checkpoint):
        raise CheckpointFormatError(f"{path} holds a {type(checkpoint).__name__}, not a checkpoint")
    return checkpoint
