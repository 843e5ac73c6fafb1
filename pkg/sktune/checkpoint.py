"""
Reading and writing of SKT1 checkpoints.

An SKT1 checkpoint is a single JSON document
{"format": "SKT1", <metadata>..., "params": {name: {"shape": [...], "data": [...]}, ...}},
with parameters sorted by name and every float written with 17 significant digits, so that
loading and re-saving a checkpoint reproduces it byte for byte. Model checkpoints carry a
"config" metadata object; adapter checkpoints carry a "method" object.
"""

# Standard library
from pathlib import Path
from typing import Any, Dict, Mapping, Tuple, Union
import json
import logging

# 3rd-party packages
import numpy as np

# Self
from .exceptions import CheckpointFormatError, NonFiniteError
from .tensor import Tensor


__all__ = ["FORMAT", "dumps", "loads", "save", "load"]


logger = logging.getLogger(__name__)

FORMAT = "SKT1"


def _format_param(name: str, values: np.ndarray) -> str:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError(f"Parameter {name!r} contains non-finite values.")
    shape = ",".join(str(dim) for dim in values.shape)
    data = ",".join(format(float(v), ".17g") for v in values.ravel())
    return f'{json.dumps(name)}:{{"shape":[{shape}],"data":[{data}]}}'


def dumps(params: Mapping[str, Union[Tensor, np.ndarray]], **metadata: Any) -> str:
    """
    Serialize named parameters (and JSON-compatible metadata) into an SKT1 document.
    """
    header = [f'"format":"{FORMAT}"']
    for key in sorted(metadata):
        header.append(f"{json.dumps(key)}:{json.dumps(metadata[key], sort_keys=True)}")
    lines = [
        _format_param(name, np.asarray(value.data if isinstance(value, Tensor) else value))
        for name, value in sorted(params.items())
    ]
    return "{" + ",".join(header) + ',"params":{\n' + ",\n".join(lines) + "\n}}\n"


def _parse_int(literal: str):
    # Parameter data write negative zero as "-0", which must keep its sign.
    return -0.0 if literal == "-0" else int(literal)


def loads(text: str) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Parse an SKT1 document.

    Returns
    -------
    params, metadata : Tuple[Dict[str, numpy.ndarray], Dict[str, Any]]
        Parameter arrays by name, and all remaining top-level fields except "format".

    Raises
    ------
    CheckpointFormatError
    """
    try:
        document = json.loads(text, parse_int=_parse_int)
    except json.JSONDecodeError as e:
        raise CheckpointFormatError(f"Checkpoint is not valid JSON ({e.msg}).") from None
    if not isinstance(document, dict) or document.get("format") != FORMAT:
        raise CheckpointFormatError(f"Checkpoint format should be {FORMAT!r}.")
    params = {}
    try:
        for name, entry in document["params"].items():
            shape = tuple(int(dim) for dim in entry["shape"])
            params[name] = np.array(entry["data"], dtype=np.float64).reshape(shape)
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise CheckpointFormatError(f"Malformed parameter entry ({e}).") from None
    metadata = {key: value for key, value in document.items() if key not in ("format", "params")}
    return params, metadata


def save(path: Union[str, Path], params: Mapping[str, Union[Tensor, np.ndarray]], **metadata):
    """Write an SKT1 checkpoint to a file."""
    Path(path).write_text(dumps(params, **metadata), encoding="utf-8")
    logger.debug(f"Wrote {len(params)} parameters to {path}.")
    return


def load(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """Read an SKT1 checkpoint from a file."""
    params, metadata = loads(Path(path).read_text(encoding="utf-8"))
    logger.debug(f"Read {len(params)} parameters from {path}.")
    return params, metadata
