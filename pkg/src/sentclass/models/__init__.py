"""The four classifier families behind one interface.

``init_params`` builds a parameter set from an architecture description and
a seed; ``forward``/``backward``/``predict`` dispatch on the parameter type.
All weights draw from a symmetric uniform range of sqrt(6 / (fan_in +
fan_out)); biases start at zero except the LSTM forget gate, which starts
at 1 so the memory path is open from the first epoch.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from .cnn import CnnParams, CnnTrace, cnn_backward, cnn_forward, init_cnn
from .fnn import FnnParams, FnnTrace, fnn_backward, fnn_forward, init_fnn
from .lstm import LstmParams, LstmTrace, init_lstm, lstm_backward, lstm_forward
from .rnn import RnnParams, RnnTrace, init_rnn, rnn_backward, rnn_forward

ModelParams = Union[FnnParams, CnnParams, RnnParams, LstmParams]


@dataclass(frozen=True)
class FnnSpec:
    layer_sizes: tuple[int, ...]  # input width, hidden widths..., classes


@dataclass(frozen=True)
class CnnSpec:
    embed_dim: int
    classes: int
    n_filters: int = 256
    window: int = 3
    hidden: int = 128
    dropout: float = 0.1


@dataclass(frozen=True)
class RnnSpec:
    embed_dim: int
    classes: int
    hidden: int = 256
    dropout: float = 0.1


@dataclass(frozen=True)
class LstmSpec:
    embed_dim: int
    classes: int
    hidden: int = 256
    dropout: float = 0.1


ARCH_TAGS = {
    FnnParams: "fnn",
    CnnParams: "cnn",
    RnnParams: "rnn",
    LstmParams: "lstm",
}
PARAMS_BY_TAG = {tag: cls for cls, tag in ARCH_TAGS.items()}


def arch_tag(params: ModelParams) -> str:
    return ARCH_TAGS[type(params)]


def init_params(spec, seed) -> ModelParams:
    """Deterministic parameter initialization for any architecture spec."""
    if isinstance(spec, FnnSpec):
        return init_fnn(list(spec.layer_sizes), seed)
    if isinstance(spec, CnnSpec):
        return init_cnn(spec.embed_dim, spec.classes, spec.n_filters, spec.window,
                        spec.hidden, spec.dropout, seed)
    if isinstance(spec, RnnSpec):
        return init_rnn(spec.embed_dim, spec.classes, spec.hidden, spec.dropout, seed)
    if isinstance(spec, LstmSpec):
        return init_lstm(spec.embed_dim, spec.classes, spec.hidden, spec.dropout, seed)
    raise TypeError(f"unknown architecture spec {type(spec).__name__}")


def forward(params: ModelParams, x, train: bool = False,
            rng: np.random.Generator | None = None):
    """Class distribution plus the trace needed by ``backward``."""
    if isinstance(params, FnnParams):
        return fnn_forward(params, x)
    if isinstance(params, CnnParams):
        return cnn_forward(params, x, train, rng)
    if isinstance(params, RnnParams):
        return rnn_forward(params, x, train, rng)
    if isinstance(params, LstmParams):
        return lstm_forward(params, x, train, rng)
    raise TypeError(f"unknown parameter set {type(params).__name__}")


def backward(params: ModelParams, trace, label: int) -> dict[str, np.ndarray]:
    """Cross-entropy gradients with the same keys and shapes as ``tensors()``."""
    pairs = {
        FnnParams: (FnnTrace, fnn_backward),
        CnnParams: (CnnTrace, cnn_backward),
        RnnParams: (RnnTrace, rnn_backward),
        LstmParams: (LstmTrace, lstm_backward),
    }
    entry = pairs.get(type(params))
    if entry is None:
        raise TypeError(f"unknown parameter set {type(params).__name__}")
    trace_cls, backward_fn = entry
    if not isinstance(trace, trace_cls):
        raise TypeError(
            f"trace {type(trace).__name__} does not match {type(params).__name__}"
        )
    return backward_fn(params, trace, label)


def predict(params: ModelParams, x) -> int:
    """Most probable class in eval mode; ties go to the smallest index."""
    probs, _ = forward(params, x, train=False)
    return int(np.argmax(probs))


__all__ = [
    "ModelParams",
    "FnnParams", "CnnParams", "RnnParams", "LstmParams",
    "FnnSpec", "CnnSpec", "RnnSpec", "LstmSpec",
    "FnnTrace", "CnnTrace", "RnnTrace", "LstmTrace",
    "init_params", "forward", "backward", "predict", "arch_tag",
    "init_fnn", "init_cnn", "init_rnn", "init_lstm",
    "fnn_forward", "cnn_forward", "rnn_forward", "lstm_forward",
    "fnn_backward", "cnn_backward", "rnn_backward", "lstm_backward",
    "ARCH_TAGS", "PARAMS_BY_TAG",
]
