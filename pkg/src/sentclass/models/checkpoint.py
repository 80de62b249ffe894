"""Self-describing checkpoint files.

Layout: a magic line, one JSON header line (architecture tag, ordered field
names and shapes, non-tensor hyperparameters, arbitrary caller metadata),
then the parameter tensors concatenated as little-endian float64 in header
order.  Writing and re-reading a checkpoint is bit-exact.
"""

import json

import numpy as np

from . import PARAMS_BY_TAG, ModelParams, arch_tag

MAGIC = b"#sentclass-checkpoint-v1\n"


class CheckpointError(ValueError):
    """File is not a readable checkpoint."""


def _hyper(params) -> dict:
    dropout = getattr(params, "dropout", None)
    return {} if dropout is None else {"dropout": dropout}


def save_checkpoint(path, params: ModelParams, meta: dict | None = None) -> None:
    """Write params (and optional JSON-serializable metadata) to ``path``."""
    tensors = params.tensors()
    header = {
        "arch": arch_tag(params),
        "fields": [[name, list(t.shape)] for name, t in tensors.items()],
        "hyper": _hyper(params),
        "meta": meta or {},
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for _, tensor in tensors.items():
            fh.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Read a checkpoint back into a parameter set and its metadata."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: unreadable header: {exc}") from None
        params_cls = PARAMS_BY_TAG.get(header.get("arch"))
        if params_cls is None:
            raise CheckpointError(f"{path}: unknown architecture {header.get('arch')!r}")
        tensors: dict[str, np.ndarray] = {}
        for name, shape in header["fields"]:
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise CheckpointError(f"{path}: truncated tensor {name!r}")
            tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        trailing = fh.read(1)
        if trailing:
            raise CheckpointError(f"{path}: trailing bytes after tensors")
    params = params_cls.from_tensors(tensors, **header.get("hyper", {}))
    return params, header.get("meta", {})
