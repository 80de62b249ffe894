"""Convolutional sentence classifier.

Pipeline per example: window convolution over the embedding rows, ReLU,
max-over-time pooling, a ReLU fully connected layer with inverted dropout
(training only), then a linear layer with softmax.
"""

from dataclasses import dataclass

import numpy as np

from ..optim import PROB_CLAMP
from ..tensor import conv1d_wgram, dropout_mask, max_pool_time, relu, softmax


@dataclass
class CnnParams:
    filters: np.ndarray  # (n_filters, embed_dim, window)
    conv_bias: np.ndarray  # (n_filters,)
    w_fc: np.ndarray  # (n_filters, hidden)
    b_fc: np.ndarray  # (hidden,)
    w_out: np.ndarray  # (hidden, classes)
    b_out: np.ndarray  # (classes,)
    dropout: float = 0.1

    @property
    def window(self) -> int:
        return self.filters.shape[2]

    @property
    def embed_dim(self) -> int:
        return self.filters.shape[1]

    @property
    def n_filters(self) -> int:
        return self.filters.shape[0]

    @property
    def hidden(self) -> int:
        return self.w_fc.shape[1]

    @property
    def classes(self) -> int:
        return self.w_out.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {
            "filters": self.filters,
            "conv_bias": self.conv_bias,
            "w_fc": self.w_fc,
            "b_fc": self.b_fc,
            "w_out": self.w_out,
            "b_out": self.b_out,
        }

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray], dropout: float = 0.1) -> "CnnParams":
        return cls(dropout=dropout, **{k: tensors[k] for k in
                                       ("filters", "conv_bias", "w_fc", "b_fc", "w_out", "b_out")})


@dataclass
class CnnTrace:
    x: np.ndarray
    conv_pre: np.ndarray  # pre-ReLU convolution output
    relu_out: np.ndarray
    pool_argmax: np.ndarray
    pooled: np.ndarray
    fc_pre: np.ndarray
    fc_act: np.ndarray
    drop_mask: np.ndarray | None
    head_in: np.ndarray
    probs: np.ndarray


def init_cnn(embed_dim: int, classes: int, n_filters: int = 256, window: int = 3,
             hidden: int = 128, dropout: float = 0.1, seed=0) -> CnnParams:
    """Glorot-uniform weights (conv fan-in is embed_dim * window), zero biases."""
    if min(embed_dim, classes, n_filters, window, hidden) < 1:
        raise ValueError("all widths must be at least 1")
    if not 0.0 <= dropout < 1.0:
        raise ValueError(f"dropout must lie in [0, 1), got {dropout}")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out, shape):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, shape)

    return CnnParams(
        filters=glorot(embed_dim * window, n_filters, (n_filters, embed_dim, window)),
        conv_bias=np.zeros(n_filters),
        w_fc=glorot(n_filters, hidden, (n_filters, hidden)),
        b_fc=np.zeros(hidden),
        w_out=glorot(hidden, classes, (hidden, classes)),
        b_out=np.zeros(classes),
        dropout=dropout,
    )


def cnn_forward(params: CnnParams, x, train: bool = False,
                rng: np.random.Generator | None = None) -> tuple[np.ndarray, CnnTrace]:
    """Class distribution for one n-by-d sentence matrix."""
    x = np.asarray(x, dtype=np.float64)
    conv_pre = conv1d_wgram(x, params.filters, params.conv_bias)
    relu_out = relu(conv_pre)
    pooled, pool_argmax = max_pool_time(relu_out)
    fc_pre = pooled @ params.w_fc + params.b_fc
    fc_act = np.maximum(fc_pre, 0.0)
    mask = None
    if train and params.dropout > 0.0:
        if rng is None:
            raise ValueError("training forward pass with dropout requires an rng")
        mask = dropout_mask(fc_act.shape[0], params.dropout, rng)
    head_in = fc_act * mask if mask is not None else fc_act
    probs = softmax(head_in @ params.w_out + params.b_out)
    trace = CnnTrace(x, conv_pre, relu_out, pool_argmax, pooled, fc_pre, fc_act,
                     mask, head_in, probs)
    return probs, trace


def cnn_backward(params: CnnParams, trace: CnnTrace, label: int) -> dict[str, np.ndarray]:
    """Cross-entropy gradients for all CNN parameters.

    The pooling layer routes gradient only to the argmax time positions
    recorded in the trace.
    """
    probs = trace.probs
    if not 0 <= label < probs.shape[0]:
        raise ValueError(f"label {label} out of range for {probs.shape[0]} classes")
    dlogits = probs.copy()
    dlogits[label] -= 1.0
    g_w_out = np.outer(trace.head_in, dlogits)
    g_b_out = dlogits
    d_head_in = params.w_out @ dlogits
    d_fc_act = d_head_in * trace.drop_mask if trace.drop_mask is not None else d_head_in
    d_fc_pre = d_fc_act * (trace.fc_pre > 0.0)
    g_w_fc = np.outer(trace.pooled, d_fc_pre)
    g_b_fc = d_fc_pre
    d_pooled = params.w_fc @ d_fc_pre
    d_relu = np.zeros_like(trace.relu_out)
    d_relu[trace.pool_argmax, np.arange(d_relu.shape[1])] = d_pooled
    d_conv = d_relu * (trace.conv_pre > 0.0)
    window = params.window
    # windows[t, j, k] = x[t + k, j]
    windows = np.lib.stride_tricks.sliding_window_view(trace.x, window, axis=0)
    g_filters = np.einsum("ti,tjk->ijk", d_conv, windows, optimize=True)
    g_conv_bias = d_conv.sum(axis=0)
    return {
        "filters": g_filters,
        "conv_bias": g_conv_bias,
        "w_fc": g_w_fc,
        "b_fc": g_b_fc,
        "w_out": g_w_out,
        "b_out": g_b_out,
    }


# ---------------------------------------------------------------------------
# Batched fast paths.  Semantics are pinned to the per-example functions
# above (see the batch-equivalence tests); these exist so training touches
# BLAS-sized arrays instead of per-example loops.
# ---------------------------------------------------------------------------


def _softmax_rows(z):
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _batch_head(params, pooled_batch, train, rng):
    b = pooled_batch.shape[0]
    fc_pre = pooled_batch @ params.w_fc + params.b_fc
    fc_act = np.maximum(fc_pre, 0.0)
    mask = None
    if train and params.dropout > 0.0:
        if rng is None:
            raise ValueError("training forward pass with dropout requires an rng")
        mask = (rng.random((b, fc_act.shape[1])) >= params.dropout) / (1.0 - params.dropout)
    head_in = fc_act * mask if mask is not None else fc_act
    probs = _softmax_rows(head_in @ params.w_out + params.b_out)
    return fc_pre, fc_act, mask, head_in, probs


def _batch_head_backward(params, cache, labels):
    fc_pre, fc_act, mask, head_in, probs, pooled_batch = cache
    b = probs.shape[0]
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b  # mean gradient over the batch
    g_w_out = head_in.T @ dlogits
    g_b_out = dlogits.sum(axis=0)
    d_head_in = dlogits @ params.w_out.T
    d_fc_act = d_head_in * mask if mask is not None else d_head_in
    d_fc_pre = d_fc_act * (fc_pre > 0.0)
    g_w_fc = pooled_batch.T @ d_fc_pre
    g_b_fc = d_fc_pre.sum(axis=0)
    d_pooled = d_fc_pre @ params.w_fc.T
    return dict(w_fc=g_w_fc, b_fc=g_b_fc, w_out=g_w_out, b_out=g_b_out), d_pooled


def _pool_batch(relu_out):
    argmax = relu_out.argmax(axis=1)  # (B, o), first maximum
    pooled = np.take_along_axis(relu_out, argmax[:, None, :], axis=1)[:, 0, :]
    return pooled, argmax


def _unpool_batch(shape, argmax, d_pooled):
    d_relu = np.zeros(shape)
    b, _, o = shape
    d_relu[np.arange(b)[:, None], argmax, np.arange(o)[None, :]] = d_pooled
    return d_relu


def cnn_batch_probs(params: CnnParams, xs: np.ndarray) -> np.ndarray:
    """Eval-mode class distributions for a (B, n, d) batch."""
    window = params.window
    windows = np.lib.stride_tricks.sliding_window_view(xs, window, axis=1)
    conv_pre = np.einsum("btjk,ijk->bti", windows, params.filters, optimize=True)
    conv_pre += params.conv_bias
    pooled, _ = _pool_batch(np.maximum(conv_pre, 0.0))
    *_, probs = _batch_head(params, pooled, train=False, rng=None)
    return probs


def cnn_batch_grads(params: CnnParams, xs: np.ndarray, labels: np.ndarray,
                    train: bool = True, rng: np.random.Generator | None = None,
                    want_dx: bool = False):
    """Per-example losses and batch-mean gradients for a (B, n, d) batch.

    With ``want_dx`` also returns the gradient with respect to the input
    rows (used when embeddings are fine-tuned).
    """
    b = xs.shape[0]
    window = params.window
    windows = np.lib.stride_tricks.sliding_window_view(xs, window, axis=1)
    conv_pre = np.einsum("btjk,ijk->bti", windows, params.filters, optimize=True)
    conv_pre += params.conv_bias
    relu_out = np.maximum(conv_pre, 0.0)
    pooled, argmax = _pool_batch(relu_out)
    fc_pre, fc_act, mask, head_in, probs = _batch_head(params, pooled, train, rng)
    picked = np.maximum(probs[np.arange(b), labels], PROB_CLAMP)
    losses = -np.log(picked)
    head_grads, d_pooled = _batch_head_backward(
        params, (fc_pre, fc_act, mask, head_in, probs, pooled), labels)
    d_conv = _unpool_batch(conv_pre.shape, argmax, d_pooled)
    d_conv *= conv_pre > 0.0
    g_filters = np.einsum("bti,btjk->ijk", d_conv, windows, optimize=True)
    grads = dict(filters=g_filters, conv_bias=d_conv.sum(axis=(0, 1)), **head_grads)
    if not want_dx:
        return losses, grads
    t_steps = conv_pre.shape[1]
    dx = np.zeros_like(xs)
    for k in range(window):
        dx[:, k:k + t_steps, :] += d_conv @ params.filters[:, :, k]
    return losses, grads, dx


# Hashed one-hot inputs: a one-hot row times the filter bank is a column
# gather, so sentences travel as index sequences (pad = -1) and the
# convolution never materialises the one-hot matrix.


def _gather_tables(params):
    # per-offset lookup tables with a trailing zero row for padding
    window = params.window
    d = params.embed_dim
    tables = []
    for k in range(window):
        table = np.vstack([params.filters[:, :, k].T, np.zeros(params.n_filters)])
        tables.append(table)
    return tables, d


def _hashed_conv(params, idx):
    tables, d = _gather_tables(params)
    window = params.window
    idx_safe = np.where(idx >= 0, idx, d)
    idx_windows = np.lib.stride_tricks.sliding_window_view(idx_safe, window, axis=1)
    conv_pre = np.full(
        (idx.shape[0], idx.shape[1] - window + 1, params.n_filters),
        0.0,
    )
    for k in range(window):
        conv_pre += tables[k][idx_windows[:, :, k]]
    conv_pre += params.conv_bias
    return conv_pre, idx_windows


def cnn_batch_probs_hashed(params: CnnParams, idx: np.ndarray) -> np.ndarray:
    """Eval-mode distributions for hashed one-hot index sequences (B, n)."""
    conv_pre, _ = _hashed_conv(params, idx)
    pooled, _ = _pool_batch(np.maximum(conv_pre, 0.0))
    *_, probs = _batch_head(params, pooled, train=False, rng=None)
    return probs


def cnn_batch_grads_hashed(params: CnnParams, idx: np.ndarray, labels: np.ndarray,
                           train: bool = True, rng: np.random.Generator | None = None):
    """Losses and mean gradients for hashed one-hot index sequences."""
    b = idx.shape[0]
    d = params.embed_dim
    conv_pre, idx_windows = _hashed_conv(params, idx)
    relu_out = np.maximum(conv_pre, 0.0)
    pooled, argmax = _pool_batch(relu_out)
    fc_pre, fc_act, mask, head_in, probs = _batch_head(params, pooled, train, rng)
    picked = np.maximum(probs[np.arange(b), labels], PROB_CLAMP)
    losses = -np.log(picked)
    head_grads, d_pooled = _batch_head_backward(
        params, (fc_pre, fc_act, mask, head_in, probs, pooled), labels)
    d_conv = _unpool_batch(conv_pre.shape, argmax, d_pooled)
    d_conv *= conv_pre > 0.0
    window = params.window
    g_filters = np.zeros_like(params.filters)
    flat_dconv = d_conv.reshape(-1, params.n_filters)
    for k in range(window):
        g_table = np.zeros((d + 1, params.n_filters))
        np.add.at(g_table, idx_windows[:, :, k].reshape(-1), flat_dconv)
        g_filters[:, :, k] = g_table[:d].T  # padding row dropped
    grads = dict(filters=g_filters, conv_bias=d_conv.sum(axis=(0, 1)), **head_grads)
    return losses, grads
