"""Task-conditioned generator, discriminators, value function and InfoGAIL posterior.

All four are thin wrappers around :class:`~sgail.approximator.Approximator`. Inputs are
concatenated as state features, then action, then task code, leaving out the parts a
network is not conditioned on.

"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import expit, log_expit, log_softmax, softmax, xlogy

from .approximator import Approximator, ApproximatorSpec, DimensionError, NonFiniteError
from .task import TaskVariable
from .typus import ActionModel, OutputHead

__all__ = ["InvalidDistributionError", "EmptyBatchError", "ActionDistribution", "Categorical", "DiagGaussian",
           "PointMass", "ConditionalPolicy", "AirlDiscriminator", "PlainDiscriminator", "ValueFunction",
           "PosteriorQ", "TransitionBatch", "task_matrix", "policy_distribution", "airl_d", "pseudo_reward",
           "value", "advantage", "posterior_log_q", "LOG_PROB_FLOOR", "INITIAL_LOG_STD"]

LOG_PROB_FLOOR = -20.0
INITIAL_LOG_STD = float(np.log(0.5))
_LOG_2PI = float(np.log(2 * np.pi))


class InvalidDistributionError(ValueError):
    """Raised when a policy hands back something that is not a usable action distribution.

    """
    pass


class EmptyBatchError(ValueError):
    pass


class ActionDistribution:
    """Interface shared by the action distributions a policy may return."""

    def validate(self) -> None:
        raise NotImplementedError

    def log_prob(self, actions) -> np.ndarray | float:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def mode(self) -> np.ndarray:
        raise NotImplementedError

    def entropy(self) -> np.ndarray | float:
        raise NotImplementedError


class Categorical(ActionDistribution):
    """Distribution over one-hot actions; ``probs`` may hold one row per state.

    Examples
    --------
    >>> dist = Categorical(np.full(4, 0.25))
    >>> float(dist.log_prob([0, 0, 1, 0])) == float(np.log(0.25))
    True

    """

    def __init__(self, probs, logits=None):
        self.probs = np.asarray(probs, dtype=np.float64)
        self.logits = None if logits is None else np.asarray(logits, dtype=np.float64)

    @classmethod
    def from_logits(cls, logits) -> "Categorical":
        return cls(softmax(logits, axis=-1), logits)

    @classmethod
    def one_hot(cls, index: int, n: int) -> "Categorical":
        probs = np.zeros(n)
        probs[index] = 1.0
        return cls(probs)

    @property
    def n_actions(self) -> int:
        return self.probs.shape[-1]

    def validate(self) -> None:
        p = self.probs
        if p.ndim < 1 or p.shape[-1] < 1 or not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidDistributionError(f"Invalid categorical probabilities {p}")
        if not np.allclose(p.sum(axis=-1), 1.0, atol=1e-6):
            raise InvalidDistributionError(f"Categorical probabilities sum to {p.sum(axis=-1)}")

    def _log_probs(self) -> np.ndarray:
        if self.logits is not None:
            return log_softmax(self.logits, axis=-1)
        with np.errstate(divide="ignore"):
            return np.log(self.probs)

    def log_prob(self, actions):
        a = np.asarray(actions, dtype=np.float64)
        if a.shape[-1] != self.n_actions:
            raise DimensionError(f"Expected one-hot actions of width {self.n_actions}, got shape {a.shape}")
        index = np.asarray(np.argmax(a, axis=-1))
        return np.take_along_axis(self._log_probs(), index[..., None], axis=-1)[..., 0]

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        index = rng.choice(self.n_actions, p=self.probs / self.probs.sum())
        return np.eye(self.n_actions)[index]

    def mode(self) -> np.ndarray:
        return np.eye(self.n_actions)[np.argmax(self.probs, axis=-1)]

    def entropy(self):
        return -np.sum(xlogy(self.probs, self.probs), axis=-1)

    def kl(self, other: "Categorical"):
        """KL(self || other), one value per row."""
        return np.sum(xlogy(self.probs, self.probs) - xlogy(self.probs, other.probs), axis=-1)

    def __repr__(self) -> str:
        return f"Categorical({np.round(self.probs, 4)})"


class DiagGaussian(ActionDistribution):
    """Diagonal Gaussian with a state-independent log standard deviation."""

    def __init__(self, mean, log_std):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.log_std = np.asarray(log_std, dtype=np.float64)

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    def validate(self) -> None:
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.log_std))):
            raise InvalidDistributionError("Gaussian mean and log-stddev must be finite")
        if self.mean.shape[-1] != self.log_std.shape[-1]:
            raise InvalidDistributionError(f"Mean of width {self.mean.shape[-1]} against "
                                           f"{self.log_std.shape[-1]} log-stddevs")

    def _per_dimension(self, actions) -> np.ndarray:
        a = np.asarray(actions, dtype=np.float64)
        if a.shape[-1] != self.mean.shape[-1]:
            raise DimensionError(f"Expected actions of width {self.mean.shape[-1]}, got shape {a.shape}")
        z = (a - self.mean) / self.std
        return -0.5 * z * z - self.log_std - 0.5 * _LOG_2PI

    def log_prob(self, actions):
        return np.sum(self._per_dimension(actions), axis=-1)

    def clamped_log_prob(self, actions):
        """Log-density with every dimension floored at :data:`LOG_PROB_FLOOR`."""
        return np.sum(np.maximum(self._per_dimension(actions), LOG_PROB_FLOOR), axis=-1)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.mean + self.std * rng.standard_normal(self.mean.shape)

    def mode(self) -> np.ndarray:
        return self.mean.copy()

    def entropy(self):
        return np.sum(self.log_std + 0.5 * (_LOG_2PI + 1.0)) * np.ones(self.mean.shape[:-1])

    def kl(self, other: "DiagGaussian"):
        var_ratio = np.exp(2 * (self.log_std - other.log_std))
        shift = ((self.mean - other.mean) / other.std) ** 2
        return np.sum(other.log_std - self.log_std + 0.5 * (var_ratio + shift - 1.0), axis=-1)


class PointMass(ActionDistribution):
    """All mass on one action. Scripted controllers return these."""

    def __init__(self, action):
        self.action = np.asarray(action, dtype=np.float64)

    def validate(self) -> None:
        if self.action.ndim != 1 or not np.all(np.isfinite(self.action)):
            raise InvalidDistributionError(f"Invalid point-mass action {self.action}")

    def log_prob(self, actions):
        return 0.0 if np.array_equal(np.asarray(actions, dtype=np.float64), self.action) else -np.inf

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.action.copy()

    def mode(self) -> np.ndarray:
        return self.action.copy()

    def entropy(self):
        return 0.0


def task_matrix(tasks, n: int, n_slots: int) -> np.ndarray:
    """Task codes as an (n, n_slots) matrix from one task, a sequence of tasks or an array."""
    if isinstance(tasks, TaskVariable):
        return np.tile(tasks.vector, (n, 1))
    if len(tasks) and isinstance(tasks[0], TaskVariable):
        return np.array([t.vector for t in tasks]).reshape(n, n_slots)
    c = np.asarray(tasks, dtype=np.float64)
    c = c.reshape(0, n_slots) if c.size == 0 else np.atleast_2d(c)
    if c.shape != (n, n_slots):
        raise DimensionError(f"Expected task codes of shape {(n, n_slots)}, got {c.shape}")
    return c


def _rows(features) -> tuple[np.ndarray, bool]:
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1 and x.size > 0
    return (x.reshape(1, -1) if single else x.reshape(x.shape[0], -1) if x.size else x.reshape(0, 0)), single


def _assemble(features, actions=None, tasks=None, n_slots: int = 3) -> tuple[np.ndarray, bool]:
    """Stack state features, actions and task codes column-wise."""
    x, single = _rows(features)
    if x.shape[0] == 0:
        return np.zeros((0, 0)), False
    parts = [x]
    if actions is not None:
        parts.append(_rows(actions)[0].reshape(x.shape[0], -1))
    if tasks is not None:
        parts.append(task_matrix(tasks, x.shape[0], n_slots))
    return np.hstack(parts), single


class ConditionalPolicy:
    """The generator π(a|s, c).

    Parameters
    ----------
    net - Approximator over (state features ⊕ task code), or state features alone when
          ``conditioned`` is False. Softmax head for categorical actions, linear head
          producing the mean for Gaussian actions.
    action_model - Categorical or diagonal Gaussian.
    log_std - Learned log standard deviation, Gaussian only.
    conditioned - Whether the task code is fed to the network.
    n_slots - Length of the task code.

    The flat parameter vector is the network parameters followed by ``log_std``.

    """

    def __init__(self, net: Approximator, action_model: ActionModel, log_std=None, conditioned: bool = True,
                 n_slots: int = 3):
        self.net = net
        self.action_model = ActionModel(action_model)
        self.conditioned = conditioned
        self.n_slots = n_slots
        if self.action_model == ActionModel.Gaussian:
            if log_std is None:
                log_std = np.full(net.spec.output_dim, INITIAL_LOG_STD)
            self.log_std = np.array(log_std, dtype=np.float64)
            if self.log_std.shape != (net.spec.output_dim,):
                raise DimensionError(f"Expected {net.spec.output_dim} log-stddevs, got {self.log_std.shape}")
        else:
            self.log_std = None

    @classmethod
    def build(cls, state_dim: int, action_dim: int, action_model: ActionModel, *, n_slots: int = 3,
              hidden_layers: Sequence[int] = (64, 64), conditioned: bool = True,
              init_seed: int = 0) -> "ConditionalPolicy":
        head = OutputHead.Softmax if ActionModel(action_model) == ActionModel.Categorical else OutputHead.Linear
        spec = ApproximatorSpec(state_dim + (n_slots if conditioned else 0), hidden_layers, action_dim, head)
        return cls(Approximator.build(spec, init_seed), action_model, None, conditioned, n_slots)

    @property
    def n_params(self) -> int:
        return self.net.n_params + (0 if self.log_std is None else self.log_std.shape[0])

    def get_params(self) -> np.ndarray:
        if self.log_std is None:
            return self.net.get_params()
        return np.concatenate([self.net.get_params(), self.log_std])

    def set_params(self, params: np.ndarray) -> None:
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (self.n_params,):
            raise DimensionError(f"Expected {self.n_params} policy parameters, got {params.shape}")
        self.net.set_params(params[:self.net.n_params])
        if self.log_std is not None:
            self.log_std = params[self.net.n_params:].copy()

    def copy(self) -> "ConditionalPolicy":
        return ConditionalPolicy(self.net.copy(), self.action_model, self.log_std, self.conditioned, self.n_slots)

    def _inputs(self, features, tasks) -> tuple[np.ndarray, bool]:
        return _assemble(features, None, tasks if self.conditioned else None, self.n_slots)

    def distribution(self, features, tasks) -> Categorical | DiagGaussian:
        """Action distribution for one state (1-D features) or a batch of states."""
        x, single = self._inputs(features, tasks)
        z = self.net.logits(x)
        if single:
            z = z[0]
        if self.action_model == ActionModel.Categorical:
            return Categorical.from_logits(z)
        return DiagGaussian(z, self.log_std.copy())

    __call__ = distribution

    def log_prob(self, features, tasks, actions, *, clamped: bool = False) -> np.ndarray:
        x = _rows(features)[0]
        dist = self.distribution(x, tasks)
        actions = np.asarray(actions, dtype=np.float64).reshape(x.shape[0], -1)
        if clamped and isinstance(dist, DiagGaussian):
            return dist.clamped_log_prob(actions)
        return dist.log_prob(actions)

    def grad_log_prob(self, features, tasks, actions, weights) -> np.ndarray:
        """Gradient of Σ_i weights_i · log π(a_i|s_i, c_i) with respect to the flat parameters."""
        x, _ = self._inputs(_rows(features)[0], tasks)
        a = np.asarray(actions, dtype=np.float64).reshape(x.shape[0], -1)
        w = np.asarray(weights, dtype=np.float64).reshape(-1, 1)
        z = self.net.logits(x)
        if self.action_model == ActionModel.Categorical:
            return self.net.backward(x, w * (a - softmax(z, axis=1)), wrt="logits")
        var = np.exp(2 * self.log_std)
        diff = a - z
        mean_grad = self.net.backward(x, w * diff / var)
        log_std_grad = np.sum(w * (diff * diff / var - 1.0), axis=0)
        return np.concatenate([mean_grad, log_std_grad])

    def kl(self, features, tasks, old: Categorical | DiagGaussian) -> float:
        """Mean KL(old || current) over the states of a batch."""
        return float(np.mean(old.kl(self.distribution(_rows(features)[0], tasks))))

    def fisher_vector_product(self, features, tasks, v: np.ndarray) -> np.ndarray:
        """Product of the Hessian of the mean KL (at the current parameters) with ``v``.

        Computed as the Gauss-Newton form Jᵀ M J with the Fisher metric M of the action
        distribution in its natural output coordinates, so no second derivatives are taken.

        """
        x, _ = self._inputs(_rows(features)[0], tasks)
        n = x.shape[0]
        if n == 0:
            raise EmptyBatchError("Fisher-vector product of an empty batch")
        v = np.asarray(v, dtype=np.float64)
        v_net = v[:self.net.n_params]
        u = self.net.jvp(x, v_net)
        if self.action_model == ActionModel.Categorical:
            p = softmax(self.net.logits(x), axis=1)
            mu = p * u - p * np.sum(p * u, axis=1, keepdims=True)
            return self.net.backward(x, mu / n, wrt="logits")
        var = np.exp(2 * self.log_std)
        return np.concatenate([self.net.backward(x, u / var / n), 2.0 * v[self.net.n_params:]])


def _check_pair(expert: "TransitionBatch", generator: "TransitionBatch"):
    if len(expert) == 0 or len(generator) == 0:
        raise EmptyBatchError("The discriminator needs both expert and generator transitions")
    for batch in (expert, generator):
        if batch.log_pi is None:
            raise ValueError("Discriminator batches must carry the current log π of their actions")


class _Discriminator:
    """Shared logistic loss over a logit z; D = expit(z)."""

    net: Approximator
    conditioned: bool
    n_slots: int

    def _inputs(self, batch: "TransitionBatch") -> np.ndarray:
        return _assemble(batch.features, batch.actions, batch.tasks if self.conditioned else None, self.n_slots)[0]

    def logit(self, batch: "TransitionBatch") -> np.ndarray:
        raise NotImplementedError

    def prob(self, batch: "TransitionBatch") -> np.ndarray:
        return expit(self.logit(batch))

    def loss_and_grad(self, expert: "TransitionBatch", generator: "TransitionBatch") -> tuple[float, np.ndarray]:
        """Negated discriminator objective E_E[log D] + E_G[log(1 - D)] and its parameter gradient.

        The log π carried by the batches is a constant input; gradients only reach the
        network.

        """
        _check_pair(expert, generator)
        z_e, z_g = self.logit(expert), self.logit(generator)
        loss = -(np.mean(log_expit(z_e)) + np.mean(log_expit(-z_g)))
        g_e = -expit(-z_e) / len(expert)
        g_g = expit(z_g) / len(generator)
        grad = self.net.backward(self._inputs(expert), g_e[:, None]) + \
            self.net.backward(self._inputs(generator), g_g[:, None])
        return float(loss), grad

    def get_params(self) -> np.ndarray:
        return self.net.get_params()

    def set_params(self, params: np.ndarray) -> None:
        self.net.set_params(params)


class AirlDiscriminator(_Discriminator):
    """Odds-ratio discriminator D = exp(f) / (exp(f) + π(a|s, c)).

    Parameters
    ----------
    f_net - Approximator mapping (state ⊕ action ⊕ task) to the scalar f, or (state ⊕ action)
            when ``conditioned`` is False.
    conditioned - Whether the task code enters f.
    n_slots - Length of the task code.

    """

    def __init__(self, f_net: Approximator, conditioned: bool = True, n_slots: int = 3):
        self.net = f_net
        self.conditioned = conditioned
        self.n_slots = n_slots

    @classmethod
    def build(cls, state_dim: int, action_dim: int, *, n_slots: int = 3, hidden_layers: Sequence[int] = (64, 64),
              conditioned: bool = True, init_seed: int = 0) -> "AirlDiscriminator":
        spec = ApproximatorSpec(state_dim + action_dim + (n_slots if conditioned else 0), hidden_layers, 1)
        return cls(Approximator.build(spec, init_seed), conditioned, n_slots)

    def f(self, batch: "TransitionBatch") -> np.ndarray:
        return self.net.logits(self._inputs(batch))[:, 0]

    def logit(self, batch: "TransitionBatch") -> np.ndarray:
        return self.f(batch) - batch.log_pi

    def reward(self, batch: "TransitionBatch", beta: float, **_) -> np.ndarray:
        return pseudo_reward(self.f(batch), batch.log_pi, beta)


class PlainDiscriminator(_Discriminator):
    """Logistic discriminator D = expit(net(s ⊕ a [⊕ c])) of the InfoGAIL baseline.

    Its reward is log D - log(1 - D) - λ1 (1 - β) log π.

    """

    def __init__(self, net: Approximator, conditioned: bool = False, n_slots: int = 3):
        self.net = net
        self.conditioned = conditioned
        self.n_slots = n_slots

    @classmethod
    def build(cls, state_dim: int, action_dim: int, *, n_slots: int = 3, hidden_layers: Sequence[int] = (64, 64),
              conditioned: bool = False, init_seed: int = 0) -> "PlainDiscriminator":
        spec = ApproximatorSpec(state_dim + action_dim + (n_slots if conditioned else 0), hidden_layers, 1)
        return cls(Approximator.build(spec, init_seed), conditioned, n_slots)

    def logit(self, batch: "TransitionBatch") -> np.ndarray:
        return self.net.logits(self._inputs(batch))[:, 0]

    def reward(self, batch: "TransitionBatch", beta: float, *, entropy_weight: float = 1.0) -> np.ndarray:
        return self.logit(batch) - entropy_weight * (1.0 - beta) * batch.log_pi


class ValueFunction:
    """V(s, c), or V(s) when not conditioned on the task."""

    def __init__(self, net: Approximator, conditioned: bool = True, n_slots: int = 3):
        self.net = net
        self.conditioned = conditioned
        self.n_slots = n_slots

    @classmethod
    def build(cls, state_dim: int, *, n_slots: int = 3, hidden_layers: Sequence[int] = (64, 64),
              conditioned: bool = True, init_seed: int = 0) -> "ValueFunction":
        spec = ApproximatorSpec(state_dim + (n_slots if conditioned else 0), hidden_layers, 1)
        return cls(Approximator.build(spec, init_seed), conditioned, n_slots)

    def __call__(self, features, tasks) -> np.ndarray | float:
        x, single = _assemble(features, None, tasks if self.conditioned else None, self.n_slots)
        v = self.net.logits(x)[:, 0]
        return float(v[0]) if single else v

    def loss_and_grad(self, features, tasks, targets) -> tuple[float, np.ndarray]:
        """Mean squared error to ``targets`` and its parameter gradient."""
        x, _ = _assemble(_rows(features)[0], None, tasks if self.conditioned else None, self.n_slots)
        if x.shape[0] == 0:
            raise EmptyBatchError("Value regression needs at least one state")
        residual = self.net.logits(x)[:, 0] - np.asarray(targets, dtype=np.float64)
        loss = float(np.mean(residual ** 2))
        return loss, self.net.backward(x, (2.0 * residual / x.shape[0])[:, None])

    def get_params(self) -> np.ndarray:
        return self.net.get_params()

    def set_params(self, params: np.ndarray) -> None:
        self.net.set_params(params)


class PosteriorQ:
    """Auxiliary posterior Q(c|s, a) over the task codes."""

    def __init__(self, net: Approximator):
        if net.spec.output_head != OutputHead.Softmax:
            raise ValueError("The posterior needs a softmax head")
        self.net = net

    @classmethod
    def build(cls, state_dim: int, action_dim: int, *, n_slots: int = 3, hidden_layers: Sequence[int] = (64, 64),
              init_seed: int = 0) -> "PosteriorQ":
        spec = ApproximatorSpec(state_dim + action_dim, hidden_layers, n_slots, OutputHead.Softmax)
        return cls(Approximator.build(spec, init_seed))

    def log_q(self, features, actions) -> np.ndarray:
        x, single = _assemble(features, actions)
        out = log_softmax(self.net.logits(x), axis=1)
        return out[0] if single else out

    def loss_and_grad(self, features, actions, task_indices) -> tuple[float, np.ndarray]:
        """-E[log Q(c|s, a)] over labelled transitions, and its parameter gradient."""
        x, _ = _assemble(_rows(features)[0], actions)
        n = x.shape[0]
        if n == 0:
            raise EmptyBatchError("Posterior training needs at least one transition")
        labels = np.eye(self.net.spec.output_dim)[np.asarray(task_indices, dtype=int)]
        logits = self.net.logits(x)
        loss = -float(np.mean(np.sum(labels * log_softmax(logits, axis=1), axis=1)))
        return loss, self.net.backward(x, (softmax(logits, axis=1) - labels) / n, wrt="logits")

    def get_params(self) -> np.ndarray:
        return self.net.get_params()

    def set_params(self, params: np.ndarray) -> None:
        self.net.set_params(params)


@dataclass
class TransitionBatch:
    """Transitions stacked row-wise.

    Parameters
    ----------
    features - Observed state features, one row per transition.
    actions - Actions taken.
    tasks - Task code of the episode each transition belongs to.
    next_features - Observed features of the next state.
    done - Whether the next state ends its episode.
    log_pi - Current log π of the actions, filled in by the trainer before each use.

    """

    features: np.ndarray
    actions: np.ndarray
    tasks: np.ndarray
    next_features: np.ndarray
    done: np.ndarray
    log_pi: np.ndarray | None = None

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def task_indices(self) -> np.ndarray:
        return np.argmax(self.tasks, axis=1) if len(self) else np.zeros(0, dtype=int)


def policy_distribution(p: ConditionalPolicy, s, c: TaskVariable) -> Categorical | DiagGaussian:
    return p.distribution(s, c)


def airl_d(f, pi_log_prob):
    """Odds-ratio discriminator output exp(f) / (exp(f) + π), evaluated as expit(f - log π).

    Examples
    --------
    >>> round(float(airl_d(2.0, np.log(0.25))), 5)
    0.96727

    Raises
    ------
    NonFiniteError when f or log π is not finite.

    """
    f = np.asarray(f, dtype=np.float64)
    pi_log_prob = np.asarray(pi_log_prob, dtype=np.float64)
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(pi_log_prob))):
        raise NonFiniteError("Discriminator inputs f and log π must be finite")
    return expit(f - pi_log_prob)


def pseudo_reward(f, pi_log_prob, beta: float):
    """log D - log(1 - D) + β log π, in its closed form f - (1 - β) log π."""
    return np.asarray(f, dtype=np.float64) - (1.0 - beta) * np.asarray(pi_log_prob, dtype=np.float64)


def value(v: ValueFunction, s, c: TaskVariable) -> float:
    return v(s, c)


def advantage(reward, v: ValueFunction, s, s_next, c, gamma: float, terminal=False):
    """A = R + γ V(s', c) - V(s, c), with V(s', c) = 0 for terminal transitions."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"Discount {gamma} outside [0, 1)")
    bootstrap = np.where(np.asarray(terminal, dtype=bool), 0.0, v(s_next, c))
    return np.asarray(reward, dtype=np.float64) + gamma * bootstrap - v(s, c)


def posterior_log_q(q: PosteriorQ, s, a) -> np.ndarray:
    return q.log_q(s, a)
