"""Multitask adversarial imitation learning: a task-conditioned generator, discriminator and
value function trained against scripted experts in a grid world and on a two-link arm,
along with the single-task and InfoGAIL-style baselines they are compared with.

"""
from ramp_core import RampJSONDecoder

from .typus import *
from .approximator import *
from .task import *
from .grid_world import *
from .reacher import *
from .models import *
from .rollout import *
from .experts import *
from .optim import *
from .variant import *
from .metrics import *
from .checkpoint import *
from .trainer import *
from .oracle import *
from .config import *
from .experiment import *

jsonable = [ApproximatorSpec, NetworkState, LearnerState, Checkpoint, AdamConfig, TrpoConfig, ModelVariant,
            BetaSchedule, TrainConfig, MetricsRecord]

RampJSONDecoder.supported = (getattr(RampJSONDecoder, "supported", None) or {}) | \
    {c.ser_identifier: c for c in jsonable}

__ver__ = 0.1
