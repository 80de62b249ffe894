"""Elman recurrent classifier.

Hidden state recurrence h_t = logistic(x_t W_in + h_{t-1} W_rec + b); the
last hidden state feeds a dropout-regularised linear head with softmax.
Backpropagation through time is exact (no truncation).
"""

from dataclasses import dataclass

import numpy as np

from ..optim import PROB_CLAMP
from ..tensor import ShapeError, dropout_mask, sigmoid, softmax


@dataclass
class RnnParams:
    w_in: np.ndarray  # (embed_dim, hidden)
    w_rec: np.ndarray  # (hidden, hidden)
    b_rec: np.ndarray  # (hidden,)
    w_head: np.ndarray  # (hidden, classes)
    b_head: np.ndarray  # (classes,)
    dropout: float = 0.1

    @property
    def hidden(self) -> int:
        return self.w_rec.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.w_in.shape[0]

    @property
    def classes(self) -> int:
        return self.w_head.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "w_in": self.w_in,
            "w_rec": self.w_rec,
            "b_rec": self.b_rec,
            "w_head": self.w_head,
            "b_head": self.b_head,
        }

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray], dropout: float = 0.1) -> "RnnParams":
        return cls(dropout=dropout, **{k: tensors[k] for k in
                                       ("w_in", "w_rec", "b_rec", "w_head", "b_head")})


@dataclass
class RnnTrace:
    x: np.ndarray
    hiddens: np.ndarray  # (n, hidden)
    drop_mask: np.ndarray | None
    head_in: np.ndarray
    probs: np.ndarray


def init_rnn(embed_dim: int, classes: int, hidden: int = 256, dropout: float = 0.1,
             seed=0) -> RnnParams:
    if min(embed_dim, classes, hidden) < 1:
        raise ValueError("all widths must be at least 1")
    if not 0.0 <= dropout < 1.0:
        raise ValueError(f"dropout must lie in [0, 1), got {dropout}")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out, shape):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, shape)

    return RnnParams(
        w_in=glorot(embed_dim, hidden, (embed_dim, hidden)),
        w_rec=glorot(hidden, hidden, (hidden, hidden)),
        b_rec=np.zeros(hidden),
        w_head=glorot(hidden, classes, (hidden, classes)),
        b_head=np.zeros(classes),
        dropout=dropout,
    )


def _check_sequence(params, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ShapeError(f"expected a non-empty (n, d) sequence, got shape {x.shape}")
    if x.shape[1] != params.embed_dim:
        raise ShapeError(f"input width {x.shape[1]} does not match embed dim {params.embed_dim}")
    return x


def rnn_forward(params: RnnParams, x, train: bool = False,
                rng: np.random.Generator | None = None) -> tuple[np.ndarray, RnnTrace]:
    """Class distribution after exactly n recurrence steps from h_0 = 0."""
    x = _check_sequence(params, x)
    n = x.shape[0]
    hiddens = np.zeros((n, params.hidden))
    h = np.zeros(params.hidden)
    for t in range(n):
        h = sigmoid(x[t] @ params.w_in + h @ params.w_rec + params.b_rec)
        hiddens[t] = h
    mask = None
    if train and params.dropout > 0.0:
        if rng is None:
            raise ValueError("training forward pass with dropout requires an rng")
        mask = dropout_mask(params.hidden, params.dropout, rng)
    head_in = h * mask if mask is not None else h
    probs = softmax(head_in @ params.w_head + params.b_head)
    return probs, RnnTrace(x, hiddens, mask, head_in, probs)


def rnn_backward(params: RnnParams, trace: RnnTrace, label: int) -> dict[str, np.ndarray]:
    """Full backpropagation through time."""
    probs = trace.probs
    if not 0 <= label < probs.shape[0]:
        raise ValueError(f"label {label} out of range for {probs.shape[0]} classes")
    hiddens = trace.hiddens
    n = hiddens.shape[0]
    dlogits = probs.copy()
    dlogits[label] -= 1.0
    g_w_head = np.outer(trace.head_in, dlogits)
    g_b_head = dlogits
    dh = params.w_head @ dlogits
    if trace.drop_mask is not None:
        dh = dh * trace.drop_mask
    g_w_in = np.zeros_like(params.w_in)
    g_w_rec = np.zeros_like(params.w_rec)
    g_b_rec = np.zeros_like(params.b_rec)
    for t in reversed(range(n)):
        h_t = hiddens[t]
        dpre = dh * h_t * (1.0 - h_t)
        g_w_in += np.outer(trace.x[t], dpre)
        g_b_rec += dpre
        h_prev = hiddens[t - 1] if t > 0 else np.zeros_like(h_t)
        g_w_rec += np.outer(h_prev, dpre)
        dh = params.w_rec @ dpre
    return {
        "w_in": g_w_in,
        "w_rec": g_w_rec,
        "b_rec": g_b_rec,
        "w_head": g_w_head,
        "b_head": g_b_head,
    }


def _softmax_rows(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _batch_hiddens(params, xs):
    b, n, _ = xs.shape
    hs = np.zeros((n, b, params.hidden))
    h = np.zeros((b, params.hidden))
    x_proj = np.einsum("bnd,dh->nbh", xs, params.w_in, optimize=True)
    for t in range(n):
        h = sigmoid(x_proj[t] + h @ params.w_rec + params.b_rec)
        hs[t] = h
    return hs


def rnn_batch_probs(params: RnnParams, xs: np.ndarray) -> np.ndarray:
    """Eval-mode class distributions for a (B, n, d) batch."""
    hs = _batch_hiddens(params, xs)
    return _softmax_rows(hs[-1] @ params.w_head + params.b_head)


def rnn_batch_grads(params: RnnParams, xs: np.ndarray, labels: np.ndarray,
                    train: bool = True, rng: np.random.Generator | None = None,
                    want_dx: bool = False):
    """Per-example losses and batch-mean gradients for a (B, n, d) batch."""
    b, n, _ = xs.shape
    hs = _batch_hiddens(params, xs)
    h_last = hs[-1]
    mask = None
    if train and params.dropout > 0.0:
        if rng is None:
            raise ValueError("training forward pass with dropout requires an rng")
        mask = (rng.random((b, params.hidden)) >= params.dropout) / (1.0 - params.dropout)
    head_in = h_last * mask if mask is not None else h_last
    probs = _softmax_rows(head_in @ params.w_head + params.b_head)
    picked = np.maximum(probs[np.arange(b), labels], PROB_CLAMP)
    losses = -np.log(picked)
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    g_w_head = head_in.T @ dlogits
    g_b_head = dlogits.sum(axis=0)
    dh = dlogits @ params.w_head.T
    if mask is not None:
        dh = dh * mask
    g_w_in = np.zeros_like(params.w_in)
    g_w_rec = np.zeros_like(params.w_rec)
    g_b_rec = np.zeros_like(params.b_rec)
    dx = np.zeros_like(xs) if want_dx else None
    for t in reversed(range(n)):
        h_t = hs[t]
        dpre = dh * h_t * (1.0 - h_t)
        g_w_in += xs[:, t, :].T @ dpre
        g_b_rec += dpre.sum(axis=0)
        h_prev = hs[t - 1] if t > 0 else np.zeros_like(h_t)
        g_w_rec += h_prev.T @ dpre
        if want_dx:
            dx[:, t, :] = dpre @ params.w_in.T
        dh = dpre @ params.w_rec.T
    grads = {
        "w_in": g_w_in,
        "w_rec": g_w_rec,
        "b_rec": g_b_rec,
        "w_head": g_w_head,
        "b_head": g_b_head,
    }
    if want_dx:
        return losses, grads, dx
    return losses, grads
