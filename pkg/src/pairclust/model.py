"""Softmax-output ReLU MLP with hand-written reverse-mode gradients.

The network maps feature columns to cluster-membership columns. Parameters
also carry the K x K logit matrix whose elementwise sigmoid is the learnable
pair-interaction matrix used by the noisy-annotation loss.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, ShapeError, StateError
from .linalg import sigmoid, softmax_columns

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class MlpParams:
    """Weights/biases of the membership network plus the interaction logits.

    layer_dims is [D, h_1, ..., h_L, K]; weights[l] has shape
    (layer_dims[l+1], layer_dims[l]) and acts on column-stacked batches.
    """

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    b_logits: np.ndarray
    seed: int = 0

    @property
    def n_clusters(self):
        return self.layer_dims[-1]

    @property
    def input_dim(self):
        return self.layer_dims[0]

    def copy(self):
        return MlpParams(
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            b_logits=self.b_logits.copy(),
            seed=self.seed,
        )


@dataclass
class ForwardTape:
    """Per-layer intermediates cached by one forward pass."""

    x: np.ndarray
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)
    m: np.ndarray | None = None


@dataclass
class MlpGrads:
    """Gradients matching MlpParams.weights / MlpParams.biases shapes."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]


def init_params(layer_dims, seed=0):
    """Seeded parameter initialization (PCG64 generator).

    Weights are Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero, and
    the interaction logits start at +1 on the diagonal and -1 elsewhere.
    """
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise ConfigError(f"layer_dims needs at least input and output sizes, got {dims}")
    if any(d <= 0 for d in dims):
        raise ConfigError(f"layer_dims must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-scale, scale, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    k = dims[-1]
    b_logits = 2.0 * np.eye(k) - 1.0
    return MlpParams(dims, weights, biases, b_logits, seed=int(seed))


def forward(params, x_batch):
    """Forward pass on a D x B column batch.

    Returns ``(m_batch, tape)`` where every column of the K x B ``m_batch``
    lies on the probability simplex.
    """
    x = np.asarray(x_batch, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"x_batch must be 2-D, got ndim={x.ndim}")
    if x.shape[0] != params.input_dim:
        raise ShapeError(
            f"x_batch has {x.shape[0]} rows, network expects {params.input_dim}"
        )
    tape = ForwardTape(x=x)
    a = x
    n_layers = len(params.weights)
    for l, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = w @ a + b[:, None]
        tape.pre.append(z)
        if l < n_layers - 1:
            a = np.maximum(z, 0.0)
            tape.post.append(a)
    m = softmax_columns(tape.pre[-1])
    tape.m = m
    return m, tape


def backward(params, tape, grad_m):
    """Exact reverse-mode gradients of a scalar loss given dLoss/dm.

    Applies the softmax Jacobian m_k (delta_kl - m_l) columnwise, then chains
    through the ReLU layers (subgradient 0 at 0). Gradients sum over the
    batch; any loss-side normalization must already live in ``grad_m``.
    """
    if len(tape.pre) != len(params.weights) or tape.m is None:
        raise StateError("tape does not match the parameter stack")
    grad_m = np.asarray(grad_m, dtype=np.float64)
    if grad_m.shape != tape.m.shape:
        raise ShapeError(
            f"grad_m shape {grad_m.shape} does not match forward output {tape.m.shape}"
        )
    m = tape.m
    # softmax Jacobian: dL/dz_l = m_l * (g_l - <g, m>) per column
    dz = m * (grad_m - np.sum(grad_m * m, axis=0, keepdims=True))
    d_weights = [None] * len(params.weights)
    d_biases = [None] * len(params.biases)
    for l in range(len(params.weights) - 1, -1, -1):
        a_prev = tape.x if l == 0 else tape.post[l - 1]
        d_weights[l] = dz @ a_prev.T
        d_biases[l] = dz.sum(axis=1)
        if l > 0:
            da = params.weights[l].T @ dz
            dz = da * (tape.pre[l - 1] > 0.0)
    return MlpGrads(d_weights, d_biases)


def b_matrix(params):
    """Pair-interaction matrix B = sigmoid(b_logits) and its elementwise derivative."""
    b = sigmoid(params.b_logits)
    return b, b * (1.0 - b)


def save_checkpoint(params, path):
    """Write parameters to a JSON checkpoint (row-major tensors, versioned)."""
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "layer_dims": [int(d) for d in params.layer_dims],
        "seed": int(params.seed),
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "b_logits": params.b_logits.tolist(),
    }
    with open(path, "w") as f:
        json.dump(doc, f)


def load_checkpoint(path):
    """Load a checkpoint written by :func:`save_checkpoint`; round-trips bit-exactly."""
    with open(path) as f:
        doc = json.load(f)
    version = doc.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint format_version: {version}")
    return MlpParams(
        layer_dims=[int(d) for d in doc["layer_dims"]],
        weights=[np.array(w, dtype=np.float64) for w in doc["weights"]],
        biases=[np.array(b, dtype=np.float64) for b in doc["biases"]],
        b_logits=np.array(doc["b_logits"], dtype=np.float64),
        seed=int(doc["seed"]),
    )
