"""Dense float64 kernels shared by every model family.

A tensor here is simply a C-contiguous ``numpy.ndarray`` of rank 1 to 3
holding 64-bit floats.  All operations are pure functions of their inputs
(plus an explicit random generator where noise is involved), so values can
be shared read-only across threads.
"""

import numpy as np

Tensor = np.ndarray


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class SequenceTooShortError(ShapeError):
    """Input has fewer time steps than the convolution window."""


def make_rng(seed) -> np.random.Generator:
    """Deterministic generator: identical seeds yield identical draws."""
    return np.random.default_rng(seed)


def as_tensor(values) -> Tensor:
    """Coerce to a rank 1-3 float64 array."""
    out = np.asarray(values, dtype=np.float64)
    if not 1 <= out.ndim <= 3:
        raise ShapeError(f"tensor rank must be between 1 and 3, got {out.ndim}")
    return out


def matmul(a, b) -> Tensor:
    """Matrix product of two rank-2 tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs two rank-2 tensors, got ranks {a.ndim} and {b.ndim}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def conv1d_wgram(x, filters, bias) -> Tensor:
    """Window convolution over time.

    ``x`` is an n-by-d sequence of row vectors, ``filters`` an o-by-d-by-w
    bank, ``bias`` an o-vector.  Output row t, column i is

        sum_j sum_k filters[i, j, k] * x[t + k, j] + bias[i]

    with t ranging over the n-w+1 window positions.
    """
    x, filters, bias = as_tensor(x), as_tensor(filters), as_tensor(bias)
    if x.ndim != 2 or filters.ndim != 3 or bias.ndim != 1:
        raise ShapeError(
            f"expected ranks (2, 3, 1), got ({x.ndim}, {filters.ndim}, {bias.ndim})"
        )
    n, d = x.shape
    o, fd, w = filters.shape
    if fd != d:
        raise ShapeError(f"filter depth {fd} does not match input width {d}")
    if bias.shape[0] != o:
        raise ShapeError(f"bias length {bias.shape[0]} does not match {o} filters")
    if n < w:
        raise SequenceTooShortError(f"sequence of {n} rows is shorter than window {w}")
    # windows[t, j, k] = x[t + k, j]
    windows = np.lib.stride_tricks.sliding_window_view(x, w, axis=0)
    return np.einsum("tjk,ijk->ti", windows, filters, optimize=True) + bias


def relu(y) -> Tensor:
    """Element-wise max(y, 0)."""
    return np.maximum(as_tensor(y), 0.0)


def sigmoid(z) -> Tensor:
    """Element-wise logistic function 1 / (1 + exp(-z))."""
    z = as_tensor(z)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])  # avoids overflow for large negative z
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z) -> Tensor:
    """Probability vector exp(z_i) / sum_k exp(z_k), stabilised by max-subtraction."""
    z = as_tensor(z)
    if z.ndim != 1 or z.shape[0] < 1:
        raise ShapeError(f"softmax expects a non-empty rank-1 tensor, got shape {z.shape}")
    e = np.exp(z - np.max(z))
    return e / e.sum()


def max_pool_time(y):
    """Column-wise maximum over time rows.

    Returns ``(pooled, argmax)`` where ``pooled[i]`` is the maximum of
    column i and ``argmax[i]`` the earliest row attaining it (ties resolve
    to the smallest row so gradient routing is deterministic).
    """
    y = as_tensor(y)
    if y.ndim != 2 or y.shape[0] < 1:
        raise ShapeError(f"max_pool_time expects a rank-2 tensor with rows, got shape {y.shape}")
    argmax = np.argmax(y, axis=0)  # first occurrence == earliest time index
    pooled = y[argmax, np.arange(y.shape[1])]
    return pooled, argmax


def dropout_mask(length: int, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout mask: entries are 0 with probability p, else 1/(1-p).

    Each entry has expectation 1, so evaluation needs no rescaling.
    """
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
    if length < 0:
        raise ValueError(f"mask length must be non-negative, got {length}")
    keep = rng.random(length) >= p
    return keep.astype(np.float64) / (1.0 - p)
