"""sentclass: neural sentence classification from scratch.

Four model families (feed-forward, convolutional, simple recurrent, LSTM)
over three input encodings (pre-trained embeddings, hashed one-hot rows,
hashed count vectors), with exact hand-derived gradients, Adagrad / SGD /
L-BFGS training and a deterministic benchmark harness.
"""

__version__ = "0.1.0"
