"""Adam for the discriminator, value function and posterior; a trust-region step for the generator.

All objectives are phrased as losses to minimize. Maximized objectives are negated by the
caller before they reach :func:`adam_step`.

"""
import logging
from dataclasses import dataclass, replace
from typing import Any, Callable, Protocol, Type, TypeVar

try:
    from typing import Self
except ImportError:
    Self = TypeVar("Self")

import numpy as np

from .approximator import DimensionError, NonFiniteError
from .models import EmptyBatchError

__all__ = ["AdamConfig", "AdamState", "adam_step", "TrpoConfig", "TrpoResult", "TrustRegionPolicy", "trpo_step",
           "conjugate_gradient", "standardize"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    ser_identifier = "AdamConfig"

    def __post_init__(self):
        if self.lr <= 0 or not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1 or self.eps <= 0:
            raise ValueError(f"Invalid Adam hyperparameters {self}")

    def serialize(self) -> tuple[str, dict[str, Any]]:
        return self.ser_identifier, dict(lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps)

    @classmethod
    def deserialize(cls: Type[Self], d: dict[str, Any], **_) -> Self:
        return cls(**d)


@dataclass(frozen=True)
class AdamState:
    """First and second moment estimates and the step counter."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState,
              cfg: AdamConfig = AdamConfig()) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam descent step.

    Raises
    ------
    DimensionError if parameters, gradient and moments differ in length.
    NonFiniteError if the gradient is not finite.

    Examples
    --------
    >>> p, st = adam_step(np.zeros(2), np.zeros(2), AdamState.zeros(2))
    >>> p.tolist(), st.t
    ([0.0, 0.0], 1)

    """
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if not params.shape == grad.shape == state.m.shape == state.v.shape:
        raise DimensionError(f"Adam got params {params.shape}, gradient {grad.shape}, moments {state.m.shape}")
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("Adam received a non-finite gradient")
    t = state.t + 1
    m = cfg.beta1 * state.m + (1 - cfg.beta1) * grad
    v = cfg.beta2 * state.v + (1 - cfg.beta2) * grad * grad
    m_hat = m / (1 - cfg.beta1 ** t)
    v_hat = v / (1 - cfg.beta2 ** t)
    return params - cfg.lr * m_hat / (np.sqrt(v_hat) + cfg.eps), AdamState(m, v, t)


@dataclass(frozen=True)
class TrpoConfig:
    """Trust-region step settings.

    Parameters
    ----------
    kl_limit - Bound δ on the mean KL(π_old || π_new) over the batch states.
    cg_iterations - Conjugate-gradient iterations for the natural-gradient direction.
    cg_damping - Multiple of the identity added to the Fisher matrix.
    shrink - Line-search step shrink factor.
    max_backtracks - Line-search candidates tried before giving up.
    cg_tol - Relative residual at which conjugate gradient stops early.

    """

    kl_limit: float = 0.01
    cg_iterations: int = 10
    cg_damping: float = 0.1
    shrink: float = 0.8
    max_backtracks: int = 10
    cg_tol: float = 1e-10

    ser_identifier = "TrpoConfig"

    def __post_init__(self):
        if self.kl_limit <= 0 or self.cg_damping < 0 or not 0 < self.shrink < 1:
            raise ValueError(f"Invalid trust-region settings {self}")
        if self.cg_iterations < 1 or self.max_backtracks < 1:
            raise ValueError("Trust-region iteration counts must be at least 1")

    def serialize(self) -> tuple[str, dict[str, Any]]:
        return self.ser_identifier, dict(kl_limit=self.kl_limit, cg_iterations=self.cg_iterations,
                                         cg_damping=self.cg_damping, shrink=self.shrink,
                                         max_backtracks=self.max_backtracks, cg_tol=self.cg_tol)

    @classmethod
    def deserialize(cls: Type[Self], d: dict[str, Any], **_) -> Self:
        return cls(**d)


@dataclass(frozen=True)
class TrpoResult:
    """Outcome of one trust-region step.

    ``params`` are the policy parameters after the step; they equal the parameters
    before it whenever ``accepted`` is False.

    """

    params: np.ndarray
    accepted: bool
    surrogate_gain: float = 0.0
    kl: float = 0.0
    backtracks: int = 0
    cg_breakdown: bool = False


class TrustRegionPolicy(Protocol):
    def get_params(self) -> np.ndarray: ...

    def set_params(self, params: np.ndarray) -> None: ...

    def distribution(self, features, tasks): ...

    def log_prob(self, features, tasks, actions, *, clamped: bool = False) -> np.ndarray: ...

    def grad_log_prob(self, features, tasks, actions, weights) -> np.ndarray: ...

    def kl(self, features, tasks, old) -> float: ...

    def fisher_vector_product(self, features, tasks, v: np.ndarray) -> np.ndarray: ...


def conjugate_gradient(matvec: Callable[[np.ndarray], np.ndarray], b: np.ndarray, iters: int = 10,
                       tol: float = 1e-10) -> np.ndarray:
    """Approximately solve A x = b for a symmetric positive-definite operator A.

    Stops when the residual norm falls to ``tol`` times the norm of b, after ``iters``
    iterations, or as soon as a search direction has non-positive curvature.

    """
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = r @ r
    threshold = (tol * np.linalg.norm(b)) ** 2
    for _ in range(iters):
        if rr <= threshold:
            break
        ap = matvec(p)
        curvature = p @ ap
        if curvature <= 0:
            break
        alpha = rr / curvature
        x += alpha * p
        r -= alpha * ap
        rr_new = r @ r
        p = r + (rr_new / rr) * p
        rr = rr_new
    return x


def standardize(advantages: np.ndarray) -> np.ndarray:
    """Zero mean, unit variance; a batch with (near) zero spread becomes all zeros."""
    a = np.asarray(advantages, dtype=np.float64)
    std = a.std()
    if a.size == 0 or std < 1e-8:
        return np.zeros_like(a)
    return (a - a.mean()) / std


def trpo_step(policy: TrustRegionPolicy, features, tasks, actions, advantages,
              cfg: TrpoConfig = TrpoConfig()) -> TrpoResult:
    """Maximize the importance-weighted surrogate mean[(π_new / π_old)(a|s, c) · A] within the KL bound.

    The natural-gradient direction comes from conjugate gradient on (F + damping I) x = g
    with Fisher-vector products of the policy, scaled to the KL boundary, then a
    backtracking line search accepts the first candidate with non-negative surrogate gain
    and mean KL within ``cfg.kl_limit``. Parameters are left bit-identical when no
    candidate is accepted, when the gradient vanishes, or when conjugate gradient breaks
    down.

    Raises
    ------
    EmptyBatchError for an empty batch.
    NonFiniteError for non-finite advantages.

    """
    advantages = np.asarray(advantages, dtype=np.float64).ravel()
    n = advantages.shape[0]
    if n == 0:
        raise EmptyBatchError("Trust-region step on an empty batch")
    if not np.all(np.isfinite(advantages)):
        raise NonFiniteError("Advantages must be finite")

    old_params = policy.get_params()
    old_log_prob = policy.log_prob(features, tasks, actions)
    old_dist = policy.distribution(features, tasks)
    g = policy.grad_log_prob(features, tasks, actions, advantages / n)
    unchanged = TrpoResult(old_params, False)
    if not np.any(g):
        return unchanged

    def fvp(v):
        return policy.fisher_vector_product(features, tasks, v) + cfg.cg_damping * v

    x = conjugate_gradient(fvp, g, cfg.cg_iterations, cfg.cg_tol)
    curvature = x @ fvp(x)
    if not (np.all(np.isfinite(x)) and np.isfinite(curvature)) or curvature <= 0:
        logger.warning("Conjugate gradient broke down (curvature %s); policy left unchanged", curvature)
        return replace(unchanged, cg_breakdown=True)

    full_step = np.sqrt(2 * cfg.kl_limit / curvature) * x
    base = float(np.mean(advantages))
    for k in range(cfg.max_backtracks):
        candidate = old_params + cfg.shrink ** k * full_step
        policy.set_params(candidate)
        ratio = np.exp(policy.log_prob(features, tasks, actions) - old_log_prob)
        gain = float(np.mean(ratio * advantages)) - base
        kl = policy.kl(features, tasks, old_dist)
        if np.isfinite(gain) and np.isfinite(kl) and gain >= 0 and kl <= cfg.kl_limit:
            return TrpoResult(policy.get_params(), True, gain, kl, k)
    policy.set_params(old_params)
    logger.debug("Line search rejected all %d candidates", cfg.max_backtracks)
    return replace(unchanged, backtracks=cfg.max_backtracks)
