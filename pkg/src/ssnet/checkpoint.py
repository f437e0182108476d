"""Checkpoint persistence: JSON manifest plus little-endian float32 blob.

The manifest at <path> records {format_version, topology_digest, model_config,
tensor_index}; tensor bytes live in the sibling blob file named by the
manifest. Tensors are addressed by byte offset, so manifest entry order does
not matter for loading. Round-trips are bit-exact for float32 parameters.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .nn import ParamStore

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(params: ParamStore, topology_digest: str, model_config: dict, path: str) -> str:
    blob_name = os.path.basename(path) + ".bin"
    index = []
    chunks = []
    offset = 0
    for name in params.names():
        arr = np.ascontiguousarray(params.values[name], dtype="<f4")
        index.append({"name": name, "shape": list(arr.shape), "byte_offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {
        "format_version": FORMAT_VERSION,
        "topology_digest": topology_digest,
        "model_config": model_config,
        "blob": blob_name,
        "tensor_index": index,
    }
    with open(path + ".bin", "wb") as fh:
        fh.write(b"".join(chunks))
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def load_checkpoint(path: str, expected_digest: str | None = None, dtype=np.float32):
    """Returns (params, manifest). Validates version, digest, and blob size."""
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {version}, expected {FORMAT_VERSION}"
        )
    if expected_digest is not None and manifest["topology_digest"] != expected_digest:
        raise CheckpointError(
            "topology digest mismatch: checkpoint has "
            f"{manifest['topology_digest']}, expected {expected_digest}"
        )
    blob_path = os.path.join(os.path.dirname(path) or ".", manifest["blob"])
    with open(blob_path, "rb") as fh:
        blob = fh.read()

    params = ParamStore(dtype)
    for entry in manifest["tensor_index"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["byte_offset"]
        end = start + 4 * count
        if end > len(blob):
            raise CheckpointError(
                f"truncated blob: tensor '{entry['name']}' needs bytes up to {end}, "
                f"blob has {len(blob)}"
            )
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start).reshape(shape)
        params.add(entry["name"], arr.astype(dtype))
    return params, manifest
