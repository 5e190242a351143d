"""
encoder.py

Multilayer-perceptron encoder θ(·) with L2-normalized output, exact analytic
gradients and a plain SGD optimizer.

Forward pass for input x (rows of X):

    h_0 = x
    h_l = act(W_l h_{l-1} + b_l)        hidden layers (relu or tanh)
    u   = W_L h_{L-1} + b_L             linear head, no activation
    v   = u / n,   n = sqrt(‖u‖² + ε²)  ε = 1e-12 guards ‖u‖ = 0

Backward pass through the normalization uses its Jacobian

    ∂v/∂u = (I - v vᵀ) / n

which holds exactly even with the ε guard. All arithmetic is float64.

Classes:
    - EncoderModel: layer dims, activation, seed, weights and biases.
    - ForwardCache: activations kept for the backward pass.
    - Gradients: per-layer weight and bias gradients.
    - SgdConfig: learning rate and schedule.

Functions:
    - init, forward, backward, sgd_step, learning_rate, encode.
"""

import copy
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from fovregress.utils.exceptions import InputError, NumericError
from fovregress.utils.utils import make_rng

NORM_EPS = 1e-12
ACTIVATIONS = ("relu", "tanh")
SCHEDULES = ("constant", "step")
DEFAULT_HIDDEN = (128, 64)
DEFAULT_OUT = 32


@dataclass
class EncoderModel:
    """
    Parameters of the MLP encoder.

    Attributes:
        dims (list[int]): [d_in, h1, ..., d_out].
        activation (str): "relu" or "tanh" for hidden layers.
        seed (int): Initialization seed.
        weights (list[ndarray]): W_l with shape (dims[l+1], dims[l]).
        biases (list[ndarray]): b_l with shape (dims[l+1],).
        iteration (int): SGD steps applied so far.
    """

    dims: list
    activation: str
    seed: int
    weights: list = field(repr=False)
    biases: list = field(repr=False)
    iteration: int = 0

    def __post_init__(self):
        self.dims = [int(d) for d in self.dims]
        if len(self.dims) < 2 or min(self.dims) < 1:
            raise InputError(f"Encoder dims need at least an input and an output size > 0, got {self.dims}")
        if self.activation not in ACTIVATIONS:
            raise InputError(f"Unknown activation '{self.activation}', expected one of {ACTIVATIONS}")
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.dims) - 1:
            raise InputError(f"Expected {len(self.dims) - 1} weight/bias arrays for dims {self.dims}")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.dims[l + 1], self.dims[l]) or b.shape != (self.dims[l + 1],):
                raise InputError(f"Layer {l}: shapes {w.shape}/{b.shape} do not match dims {self.dims}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InputError(f"Layer {l}: parameters must be finite")

    @property
    def d_in(self):
        return self.dims[0]

    @property
    def d_out(self):
        return self.dims[-1]

    @property
    def n_layers(self):
        return len(self.weights)

    def copy(self):
        """Deep copy, used to freeze snapshots."""
        return copy.deepcopy(self)

    def parameters(self):
        """Flat list [W_0, b_0, W_1, b_1, ...] of the parameter arrays."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass
class ForwardCache:
    """Layer inputs/pre-activations of one forward call."""

    inputs: list
    pre_activations: list
    norms: np.ndarray
    outputs: np.ndarray


@dataclass
class Gradients:
    weights: list
    biases: list

    def __add__(self, other):
        return Gradients(
            [a + b for a, b in zip(self.weights, other.weights)],
            [a + b for a, b in zip(self.biases, other.biases)],
        )

    def scale(self, factor):
        return Gradients([factor * g for g in self.weights], [factor * g for g in self.biases])

    def is_finite(self):
        return bool(np.all(np.isfinite(self.flatten())))

    def arrays(self):
        """Flat list [gW_0, gb_0, gW_1, gb_1, ...] in `EncoderModel.parameters` order."""
        out = []
        for gw, gb in zip(self.weights, self.biases):
            out.extend((gw, gb))
        return out

    def flatten(self):
        return np.concatenate([g.ravel() for g in self.arrays()])


@dataclass(frozen=True)
class SgdConfig:
    """
    Optimizer settings.

    Attributes:
        learning_rate (float): Initial learning rate (> 0).
        schedule (str): "constant" or "step".
        step_factor (float): Multiplier applied every `step_period` iterations.
        step_period (int): Iterations between decays (> 0).
    """

    learning_rate: float = 0.1
    schedule: str = "constant"
    step_factor: float = 0.1
    step_period: int = 250_000

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InputError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.schedule not in SCHEDULES:
            raise InputError(f"Unknown schedule '{self.schedule}', expected one of {SCHEDULES}")
        if int(self.step_period) <= 0:
            raise InputError(f"step_period must be > 0, got {self.step_period}")
        if not self.step_factor > 0:
            raise InputError(f"step_factor must be > 0, got {self.step_factor}")


def init(dims, activation="relu", seed=0):
    """
    Xavier-uniform initialization with zero biases.

    Parameters:
        dims (Sequence[int]): [d_in, h1, ..., d_out].
        activation (str): Hidden-layer activation.
        seed (int): Initialization seed.

    Returns:
        EncoderModel
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2:
        raise InputError(f"Encoder dims need at least an input and an output size, got {dims}")
    rng = make_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return EncoderModel(dims, activation, int(seed), weights, biases)


def _activate(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(z, activation):
    if activation == "relu":
        return (z > 0.0).astype(float)
    t = np.tanh(z)
    return 1.0 - t * t


def forward(model, observation):
    """
    Encode one observation or a batch of observations.

    Parameters:
        model (EncoderModel)
        observation (ndarray): Shape (d_in,) or (n, d_in).

    Returns:
        tuple: (descriptors with the input's leading shape and d_out columns,
        ForwardCache for `backward`)
    """
    x = np.asarray(observation, dtype=float)
    single = x.ndim == 1
    h = np.atleast_2d(x)
    if h.shape[1] != model.d_in:
        raise InputError(f"Observation dimension {h.shape[1]} does not match encoder input {model.d_in}")

    inputs, pre = [], []
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        h = z if l == model.n_layers - 1 else _activate(z, model.activation)

    norms = np.sqrt(np.sum(h * h, axis=1) + NORM_EPS ** 2)
    v = h / norms[:, None]
    cache = ForwardCache(inputs, pre, norms, v)
    return (v[0] if single else v), cache


def backward(model, cache, grad_wrt_descriptor):
    """
    Back-propagate a descriptor gradient to the parameters.

    Gradients are summed over the rows of the batch.

    Parameters:
        model (EncoderModel): The model used for the matching forward call.
        cache (ForwardCache): Cache returned by `forward`.
        grad_wrt_descriptor (ndarray): ∂L/∂v, same shape as the forward output.

    Returns:
        Gradients
    """
    g = np.atleast_2d(np.asarray(grad_wrt_descriptor, dtype=float))
    v = cache.outputs
    if g.shape != v.shape:
        raise InputError(f"Descriptor gradient shape {g.shape} does not match forward output {v.shape}")

    # (I - v vᵀ) g / n, row by row
    grad = (g - v * np.sum(v * g, axis=1, keepdims=True)) / cache.norms[:, None]

    grad_w = [None] * model.n_layers
    grad_b = [None] * model.n_layers
    for l in range(model.n_layers - 1, -1, -1):
        if l < model.n_layers - 1:
            grad = grad * _activation_grad(cache.pre_activations[l], model.activation)
        grad_w[l] = grad.T @ cache.inputs[l]
        grad_b[l] = grad.sum(axis=0)
        if l > 0:
            grad = grad @ model.weights[l]
    return Gradients(grad_w, grad_b)


def learning_rate(cfg, iteration):
    """Learning rate in effect at `iteration` (0-based)."""
    if cfg.schedule == "constant":
        return cfg.learning_rate
    return cfg.learning_rate * cfg.step_factor ** (int(iteration) // int(cfg.step_period))


def sgd_step(model, gradients, iteration, cfg):
    """
    Apply p <- p - lr(iteration) * g in place.

    Parameters:
        model (EncoderModel): Updated in place and returned.
        gradients (Gradients): Matching parameter gradients.
        iteration (int): Iteration index used by the schedule.
        cfg (SgdConfig)

    Returns:
        EncoderModel

    Raises:
        NumericError: if any gradient entry is not finite (model untouched).
        InputError: if gradient shapes do not match the model.
    """
    params, grads = model.parameters(), gradients.arrays()
    if len(params) != len(grads):
        raise InputError(f"Expected gradients for {len(params) // 2} layers, got {len(grads) // 2}")
    for k, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.shape:
            raise InputError(f"Layer {k // 2}: gradient shape {g.shape} does not match {p.shape}")
    if not gradients.is_finite():
        raise NumericError(f"Non-finite gradient at iteration {iteration}", iteration=iteration)

    lr = learning_rate(cfg, iteration)
    for p, g in zip(params, grads):
        p -= lr * g
    model.iteration = int(iteration) + 1
    return model


def encode(model, observations, batch_size=1024):
    """
    Descriptors for a matrix of observations, computed in chunks.

    Parameters:
        model (EncoderModel)
        observations (ndarray): (n, d_in).

    Returns:
        ndarray: (n, d_out) unit-norm descriptors.
    """
    x = np.atleast_2d(np.asarray(observations, dtype=float))
    if len(x) == 0:
        return np.zeros((0, model.d_out))
    chunks = [forward(model, x[s:s + batch_size])[0] for s in range(0, len(x), batch_size)]
    out = np.vstack(chunks)
    logging.debug(f"Encoded {len(out)} observations to {model.d_out}-d descriptors")
    return out
