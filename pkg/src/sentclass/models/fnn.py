"""Feed-forward classifier: logistic hidden layers, softmax output layer."""

from dataclasses import dataclass

import numpy as np

from ..optim import PROB_CLAMP, cross_entropy
from ..tensor import ShapeError, sigmoid, softmax


@dataclass
class FnnParams:
    """Stacked dense layers; weights[i] has shape (fan_in, fan_out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def classes(self) -> int:
        return self.weights[-1].shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"w{i}"] = w
            out[f"b{i}"] = b
        return out

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "FnnParams":
        depth = len(tensors) // 2
        return cls(
            weights=[tensors[f"w{i}"] for i in range(depth)],
            biases=[tensors[f"b{i}"] for i in range(depth)],
        )


@dataclass
class FnnTrace:
    activations: list[np.ndarray]  # input, hidden outputs, probs
    probs: np.ndarray


def init_fnn(layer_sizes, seed) -> FnnParams:
    """Glorot-uniform weights, zero biases, one (weight, bias) pair per layer."""
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise ValueError(f"need at least two positive layer sizes, got {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return FnnParams(weights=weights, biases=biases)


def fnn_forward(params: FnnParams, x) -> tuple[np.ndarray, FnnTrace]:
    """Class distribution for one input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.weights[0].shape[0]:
        raise ShapeError(
            f"input shape {x.shape} does not match first layer "
            f"({params.weights[0].shape[0]},)"
        )
    activations = [x]
    a = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        a = softmax(z) if i == last else sigmoid(z)
        activations.append(a)
    return a, FnnTrace(activations=activations, probs=a)


def fnn_backward(params: FnnParams, trace: FnnTrace, label: int) -> dict[str, np.ndarray]:
    """Cross-entropy gradients for every layer."""
    probs = trace.probs
    if not 0 <= label < probs.shape[0]:
        raise ValueError(f"label {label} out of range for {probs.shape[0]} classes")
    if len(trace.activations) != len(params.weights) + 1:
        raise ShapeError("trace does not match parameter depth")
    dz = probs.copy()
    dz[label] -= 1.0  # softmax + cross-entropy
    grads: dict[str, np.ndarray] = {}
    for i in reversed(range(len(params.weights))):
        a_prev = trace.activations[i]
        grads[f"w{i}"] = np.outer(a_prev, dz)
        grads[f"b{i}"] = dz.copy()
        if i > 0:
            da = params.weights[i] @ dz
            a = trace.activations[i]
            dz = da * a * (1.0 - a)  # logistic derivative
    return grads


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def fnn_batch_probs(params: FnnParams, xs: np.ndarray) -> np.ndarray:
    """Forward pass over a whole design matrix (rows are examples)."""
    a = xs
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        a = _softmax_rows(z) if i == last else sigmoid(z)
    return a


def fnn_batch_loss_grads(params: FnnParams, xs: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and its gradients over a batch.

    Matches averaging ``fnn_backward`` over the rows; used for full-batch
    objectives and minibatch steps.
    """
    n = xs.shape[0]
    activations = [xs]
    a = xs
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        a = _softmax_rows(z) if i == last else sigmoid(z)
        activations.append(a)
    probs = a
    picked = np.maximum(probs[np.arange(n), labels], PROB_CLAMP)
    loss = float(-np.log(picked).mean())
    dz = probs.copy()
    dz[np.arange(n), labels] -= 1.0
    dz /= n
    grads: dict[str, np.ndarray] = {}
    for i in reversed(range(len(params.weights))):
        a_prev = activations[i]
        grads[f"w{i}"] = a_prev.T @ dz
        grads[f"b{i}"] = dz.sum(axis=0)
        if i > 0:
            da = dz @ params.weights[i].T
            a_mid = activations[i]
            dz = da * a_mid * (1.0 - a_mid)
    return loss, grads


def fnn_example_loss(params: FnnParams, x, label: int) -> float:
    probs, _ = fnn_forward(params, x)
    return cross_entropy(probs, label)
