"""Versioned binary container for named numeric arrays plus config and seed.

Layout: magic, format version, u32 header length, JSON header (config,
vocab hash, seed, array descriptors in a fixed order), then raw row-major
array payloads.  Writing the same model twice yields byte-identical files.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"PRCKPT\x00\x00"
FORMAT_VERSION = 1

_DTYPES = {"float64": "<f8", "float32": "<f4", "int64": "<i8"}


def write_checkpoint(path, arrays: dict, config: dict, vocab_hash: str, seed: int):
    names = list(arrays)
    descriptors = []
    payloads = []
    for name in names:
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype.name not in _DTYPES:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for array {name!r}")
        descriptors.append({"name": name, "dtype": arr.dtype.name, "shape": list(arr.shape)})
        payloads.append(arr.astype(_DTYPES[arr.dtype.name]).tobytes())
    header = json.dumps(
        {"config": config, "vocab_hash": vocab_hash, "seed": seed, "arrays": descriptors},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for payload in payloads:
            f.write(payload)


def read_checkpoint(path):
    """Returns (arrays, config, vocab_hash, seed)."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    off = len(MAGIC)
    (version,) = struct.unpack_from("<I", blob, off)
    off += 4
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<I", blob, off)
    off += 4
    try:
        header = json.loads(blob[off : off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
    off += hlen
    arrays = {}
    for desc in header["arrays"]:
        dtype = np.dtype(_DTYPES[desc["dtype"]])
        count = int(np.prod(desc["shape"], dtype=np.int64)) if desc["shape"] else 1
        nbytes = count * dtype.itemsize
        if off + nbytes > len(blob):
            raise CheckpointError(f"truncated payload for array {desc['name']!r}")
        arr = np.frombuffer(blob[off : off + nbytes], dtype=dtype).reshape(desc["shape"])
        arrays[desc["name"]] = arr.astype(desc["dtype"])
        off += nbytes
    if off != len(blob):
        raise CheckpointError("trailing bytes after last array payload")
    return arrays, header["config"], header["vocab_hash"], header["seed"]
