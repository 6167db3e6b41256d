"""Minimal reverse-mode differentiable feedforward approximators.

The generator, the discriminator body f, the value function and the InfoGAIL
posterior are all :class:`Approximator` instances. Parameters are kept in one flat
float64 vector so the trust-region step can treat a network as a point in R^n.

"""
from dataclasses import dataclass
from typing import Any, Iterator, Sequence, Type, TypeVar

try:
    from typing import Self
except ImportError:
    Self = TypeVar("Self")

import numpy as np
from scipy.special import softmax

from .typus import Activation, OutputHead

__all__ = ["SpecError", "DimensionError", "NonFiniteError", "ApproximatorSpec", "Approximator", "LEAKY_SLOPE"]

LEAKY_SLOPE = 0.01


class SpecError(ValueError):
    """Raised when an approximator specification has an impossible shape.

    """
    pass


class DimensionError(ValueError):
    """Raised when an array handed to a model has the wrong length or width.

    """
    pass


class NonFiniteError(ValueError):
    """Raised when a state, action, gradient or derived quantity is NaN or infinite.

    """
    pass


@dataclass(frozen=True)
class ApproximatorSpec:
    """Shape of a feedforward approximator.

    Parameters
    ----------
    input_dim - Width of the input vector.
    hidden_layers - Widths of the hidden layers, may be empty for an affine map.
    output_dim - Width of the output vector.
    output_head - Linear output or a softmax over the outputs.
    hidden_activation - Nonlinearity after every hidden layer.

    """

    input_dim: int
    hidden_layers: Sequence[int] = (64, 64)
    output_dim: int = 1
    output_head: OutputHead = OutputHead.Linear
    hidden_activation: Activation = Activation.LeakyRelu

    ser_identifier = "ApproximatorSpec"

    def __post_init__(self):
        object.__setattr__(self, "hidden_layers", tuple(int(h) for h in self.hidden_layers))
        object.__setattr__(self, "output_head", OutputHead(self.output_head))
        object.__setattr__(self, "hidden_activation", Activation(self.hidden_activation))
        dims = (self.input_dim, *self.hidden_layers, self.output_dim)
        if any(int(d) < 1 for d in dims):
            raise SpecError(f"All approximator dimensions must be positive, got {dims}")
        if self.output_head == OutputHead.Softmax and self.output_dim < 2:
            raise SpecError("A softmax head needs at least two outputs")

    @property
    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) of every affine layer, input side first."""
        dims = (self.input_dim, *self.hidden_layers, self.output_dim)
        return list(zip(dims[:-1], dims[1:]))

    @property
    def n_params(self) -> int:
        return sum((fan_in + 1) * fan_out for fan_in, fan_out in self.layer_shapes)

    def serialize(self) -> tuple[str, dict]:
        return self.ser_identifier, dict(input_dim=self.input_dim,
                                         hidden_layers=list(self.hidden_layers),
                                         output_dim=self.output_dim,
                                         output_head=self.output_head.value,
                                         hidden_activation=self.hidden_activation.value)

    @classmethod
    def deserialize(cls: Type[Self], d: dict[str, Any], **_) -> Self:
        return cls(**d)


def _leaky(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, z, LEAKY_SLOPE * z)


def _leaky_grad(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, 1.0, LEAKY_SLOPE)


class Approximator:
    """A feedforward network y = head(W_L h_{L-1} + b_L), h_l = leaky(W_l h_{l-1} + b_l).

    Parameters
    ----------
    spec - The network shape.
    params - Flat parameter vector. Layers are stored input side first, each as its
             (fan_out, fan_in) weight matrix in row-major order followed by its bias.
             Defaults to all zeros.

    Inputs may be a single vector or a batch with one row per input; outputs follow
    the same convention.

    """

    def __init__(self, spec: ApproximatorSpec, params: np.ndarray | None = None):
        self.spec = spec
        if params is None:
            params = np.zeros(spec.n_params)
        self._params = self._checked(params)

    @classmethod
    def build(cls, spec: ApproximatorSpec, init_seed: int) -> "Approximator":
        """Draw scaled-uniform weights and zero biases, reproducibly for a seed.

        Examples
        --------
        >>> spec = ApproximatorSpec(5, (64, 64), 4, OutputHead.Softmax)
        >>> Approximator.build(spec, 0).n_params
        8772

        """
        rng = np.random.default_rng(init_seed)
        chunks = []
        for fan_in, fan_out in spec.layer_shapes:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            chunks.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
            chunks.append(np.zeros(fan_out))
        return cls(spec, np.concatenate(chunks))

    @property
    def n_params(self) -> int:
        return self.spec.n_params

    def get_params(self) -> np.ndarray:
        return self._params.copy()

    def set_params(self, params: np.ndarray) -> None:
        self._params = self._checked(params)

    def copy(self) -> "Approximator":
        return type(self)(self.spec, self._params)

    def _checked(self, params) -> np.ndarray:
        params = np.array(params, dtype=np.float64).ravel()
        if params.shape[0] != self.spec.n_params:
            raise DimensionError(f"Expected {self.spec.n_params} parameters, got {params.shape[0]}")
        return params

    def _layers(self, params: np.ndarray) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        offset = 0
        for fan_in, fan_out in self.spec.layer_shapes:
            weights = params[offset:offset + fan_in * fan_out].reshape(fan_out, fan_in)
            offset += fan_in * fan_out
            bias = params[offset:offset + fan_out]
            offset += fan_out
            yield weights, bias

    def _batch(self, inputs) -> tuple[np.ndarray, bool]:
        x = np.asarray(inputs, dtype=np.float64)
        if x.size == 0:
            return x.reshape(0, self.spec.input_dim), False
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.ndim != 2 or x.shape[1] != self.spec.input_dim:
            raise DimensionError(f"Expected inputs of width {self.spec.input_dim}, got shape {np.shape(inputs)}")
        return x, single

    def _trace(self, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Layer inputs and pre-activations of every layer for a batch."""
        layer_inputs, pre_activations = [], []
        h = x
        layers = list(self._layers(self._params))
        for i, (weights, bias) in enumerate(layers):
            z = h @ weights.T + bias
            layer_inputs.append(h)
            pre_activations.append(z)
            if i < len(layers) - 1:
                h = _leaky(z)
        return layer_inputs, pre_activations

    def logits(self, inputs) -> np.ndarray:
        """Output of the last affine layer, before the head."""
        x, single = self._batch(inputs)
        z = self._trace(x)[1][-1]
        return z[0] if single else z

    def forward(self, inputs) -> np.ndarray:
        z = self.logits(inputs)
        if self.spec.output_head == OutputHead.Softmax:
            return softmax(z, axis=-1)
        return z

    __call__ = forward

    def backward(self, inputs, output_grads, *, wrt: str = "output") -> np.ndarray:
        """Gradient of sum_i <y_i, g_i> with respect to the flat parameters.

        Parameters
        ----------
        inputs - Batch of inputs x_i.
        output_grads - Batch of output-space cotangents g_i, one row per input.
        wrt - "output" differentiates the head output y, "logits" the pre-head output.
              They only differ for a softmax head.

        Returns
        -------
        Flat gradient vector, same layout as the parameters.

        """
        x, _ = self._batch(inputs)
        g = np.asarray(output_grads, dtype=np.float64)
        g = g.reshape(0, self.spec.output_dim) if g.size == 0 else np.atleast_2d(g)
        if g.shape != (x.shape[0], self.spec.output_dim):
            raise DimensionError(f"Expected output gradients of shape {(x.shape[0], self.spec.output_dim)}, "
                                 f"got {g.shape}")
        if x.shape[0] == 0:
            return np.zeros(self.n_params)
        layer_inputs, pre_activations = self._trace(x)
        if wrt == "output" and self.spec.output_head == OutputHead.Softmax:
            p = softmax(pre_activations[-1], axis=-1)
            g = p * (g - np.sum(p * g, axis=1, keepdims=True))
        elif wrt not in ("output", "logits"):
            raise ValueError(f"Unknown differentiation target {wrt!r}")

        layers = list(self._layers(self._params))
        grads = [None] * len(layers)
        for i in reversed(range(len(layers))):
            weights, _ = layers[i]
            grads[i] = np.concatenate([(g.T @ layer_inputs[i]).ravel(), g.sum(axis=0)])
            if i > 0:
                g = (g @ weights) * _leaky_grad(pre_activations[i - 1])
        return np.concatenate(grads)

    def jvp(self, inputs, tangent: np.ndarray) -> np.ndarray:
        """Forward-mode directional derivative of the logits along a parameter tangent."""
        x, single = self._batch(inputs)
        tangent = self._checked(tangent)
        layer_inputs, pre_activations = self._trace(x)
        layers = list(self._layers(self._params))
        dh = np.zeros_like(x)
        for i, ((weights, _), (d_weights, d_bias)) in enumerate(zip(layers, self._layers(tangent))):
            dz = dh @ weights.T + layer_inputs[i] @ d_weights.T + d_bias
            if i < len(layers) - 1:
                dh = _leaky_grad(pre_activations[i]) * dz
        return dz[0] if single else dz

    def __repr__(self) -> str:
        s = self.spec
        return f"Approximator({s.input_dim}->{list(s.hidden_layers)}->{s.output_dim}, {s.output_head.value})"
