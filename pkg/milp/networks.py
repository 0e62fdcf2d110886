"""
Feed-forward ReLU controllers and interval bounds on their pre-activations.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from utils.exceptions import ModelError

logger = logging.getLogger(__name__)

RELU = 'relu'
LINEAR = 'linear'
ACTIVATIONS = (RELU, LINEAR)

BOUND_PADDING = 1e-9


@dataclass(frozen=True, eq=False)
class Layer:
    weights: np.ndarray
    biases: np.ndarray
    activation: str = RELU

    def __post_init__(self):
        weights = np.atleast_2d(np.asarray(self.weights, dtype=float))
        biases = np.asarray(self.biases, dtype=float).reshape(-1)
        if biases.shape[0] != weights.shape[0]:
            raise ModelError(f'Layer has {weights.shape[0]} neurons but {biases.shape[0]} biases')
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(biases))):
            raise ModelError('Layer weights and biases must be finite')
        if self.activation not in ACTIVATIONS:
            raise ModelError(f'Unknown activation {self.activation!r}')
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'biases', biases)

    @property
    def input_size(self):
        return self.weights.shape[1]

    @property
    def output_size(self):
        return self.weights.shape[0]

    def preactivation(self, x):
        return x @ self.weights.T + self.biases

    def activate(self, z):
        return np.maximum(z, 0.0) if self.activation == RELU else z


@dataclass(frozen=True, eq=False)
class NeuralNetwork:
    """
    A controller u: R^n -> R^n. Outputs listed in `constant_outputs`
    (1-based index -> value) ignore the layers and return their constant.
    """
    layers: tuple
    constant_outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ModelError('A network needs at least one layer')
        for i, (before, after) in enumerate(zip(layers, layers[1:]), start=1):
            if before.output_size != after.input_size:
                raise ModelError(
                    f'Layer {i} outputs {before.output_size} values but layer {i + 1} expects {after.input_size}'
                )
        if layers[-1].activation != LINEAR:
            raise ModelError('The final layer must be linear')
        constants = {int(k): float(v) for k, v in dict(self.constant_outputs).items()}
        for index, value in constants.items():
            if not 1 <= index <= layers[-1].output_size:
                raise ModelError(f'Constant output {index} is outside 1..{layers[-1].output_size}')
            if not np.isfinite(value):
                raise ModelError(f'Constant output {index} must be finite')
        object.__setattr__(self, 'layers', layers)
        object.__setattr__(self, 'constant_outputs', constants)

    @classmethod
    def zeros(cls, n, hidden=1):
        """A controller whose every output is the constant zero."""
        return cls((Layer(np.zeros((hidden, n)), np.zeros(hidden), RELU),
                    Layer(np.zeros((n, hidden)), np.zeros(n), LINEAR)),
                   {i: 0.0 for i in range(1, n + 1)})

    @property
    def input_size(self):
        return self.layers[0].input_size

    @property
    def output_size(self):
        return self.layers[-1].output_size

    def is_constant(self, output):
        return output in self.constant_outputs

    @property
    def all_constant(self):
        return len(self.constant_outputs) == self.output_size

    def forward(self, x):
        """Controller output for one state (n,) or a batch (N, n)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        a = np.atleast_2d(x)
        if a.shape[1] != self.input_size:
            raise ModelError(f'Network expects {self.input_size} inputs, got {a.shape[1]}')
        for layer in self.layers:
            a = layer.activate(layer.preactivation(a))
        for index, value in self.constant_outputs.items():
            a[:, index - 1] = value
        return a[0] if single else a


@dataclass(frozen=True, eq=False)
class LayerBounds:
    """Interval bounds on the pre-activations of one layer."""
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if np.any(self.lower > self.upper):
            raise ModelError('Layer bounds have lower > upper')

    def __len__(self):
        return len(self.lower)


def propagate_preactivation_bounds(network, lower, upper):
    """
    Interval matrix-vector propagation through every layer, widened by a
    relative BOUND_PADDING so that float rounding never cuts off a reachable
    pre-activation.
    """
    lo = np.asarray(lower, dtype=float).reshape(-1)
    hi = np.asarray(upper, dtype=float).reshape(-1)
    if lo.shape[0] != network.input_size or np.any(lo > hi) or not np.all(np.isfinite(lo + hi)):
        raise ModelError('Input box must be finite, non-empty and match the network input size')
    bounds = []
    for layer in network.layers:
        positive = np.maximum(layer.weights, 0.0)
        negative = np.minimum(layer.weights, 0.0)
        z_lo = positive @ lo + negative @ hi + layer.biases
        z_hi = positive @ hi + negative @ lo + layer.biases
        pad = BOUND_PADDING * (1.0 + np.maximum(np.abs(z_lo), np.abs(z_hi)))
        z_lo, z_hi = z_lo - pad, z_hi + pad
        bounds.append(LayerBounds(z_lo, z_hi))
        lo, hi = layer.activate(z_lo), layer.activate(z_hi)
    return bounds
