"""Binary checkpoint format shared by the generator and discriminator.

Layout: an 8-byte little-endian unsigned header length N, then N bytes of
UTF-8 JSON mapping tensor names to ``{"dtype": "f32", "shape": [...],
"offset": int}`` (byte offset into the payload), plus run metadata under the
reserved ``"meta"`` key, then the contiguous little-endian float32 payload.
Tensor names are namespaced ``G/E_1/...``, ``G/E_m/...``, ``G/M/...``,
``D/m/...``, ``D/cls/...``, ``D/adv_1/...``; optimizer moments live under
``opt/...``.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import CheckpointIOError, FormatError

_HEADER_LEN = struct.Struct("<Q")


def write_checkpoint(path, tensors: dict[str, np.ndarray], meta: dict) -> None:
    """Atomically write tensors and metadata to ``path``."""
    index: dict[str, object] = {}
    chunks: list[bytes] = []
    offset = 0
    for name in sorted(tensors):
        if name == "meta":
            raise FormatError('"meta" is a reserved checkpoint key')
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        raw = arr.tobytes()
        index[name] = {"dtype": "f32", "shape": list(arr.shape), "offset": offset}
        chunks.append(raw)
        offset += len(raw)
    index["meta"] = meta
    header = json.dumps(index, sort_keys=True).encode("utf-8")

    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(_HEADER_LEN.pack(len(header)))
                fh.write(header)
                for chunk in chunks:
                    fh.write(chunk)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as e:
        raise CheckpointIOError(f"cannot write checkpoint {path}: {e}") from e


def read_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read a checkpoint; raises FormatError on structural damage."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as e:
        raise CheckpointIOError(f"cannot read checkpoint {path}: {e}") from e
    if len(blob) < _HEADER_LEN.size:
        raise FormatError("checkpoint shorter than its length header")
    (n,) = _HEADER_LEN.unpack_from(blob, 0)
    header_end = _HEADER_LEN.size + n
    if len(blob) < header_end:
        raise FormatError("checkpoint header truncated")
    try:
        index = json.loads(blob[_HEADER_LEN.size:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"checkpoint header is not valid JSON: {e}") from e
    if not isinstance(index, dict) or "meta" not in index:
        raise FormatError("checkpoint header lacks the meta entry")
    meta = index.pop("meta")
    payload = blob[header_end:]
    tensors: dict[str, np.ndarray] = {}
    for name, entry in index.items():
        try:
            shape = tuple(int(d) for d in entry["shape"])
            offset = int(entry["offset"])
            dtype = entry["dtype"]
        except (TypeError, KeyError, ValueError) as e:
            raise FormatError(f"bad tensor entry for {name!r}: {entry!r}") from e
        if dtype != "f32":
            raise FormatError(f"unsupported dtype {dtype!r} for {name!r}")
        nbytes = int(np.prod(shape, dtype=np.int64)) * 4
        if offset < 0 or offset + nbytes > len(payload):
            raise FormatError(f"checkpoint payload truncated at tensor {name!r}")
        arr = np.frombuffer(payload, dtype="<f4", count=nbytes // 4, offset=offset)
        tensors[name] = arr.reshape(shape).copy()
    return tensors, meta
