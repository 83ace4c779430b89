"""
checkpoint container.

layout (little endian): magic "DTRC", u16 version, u16 reserved, u64
manifest length, a UTF-8 JSON manifest with sorted keys, then the
concatenated float64 arrays in manifest order. the manifest records the
hyperparameters and, per array, its name, shape and byte offset into the
payload.
"""

import json
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dtrsum.core.errors import CheckpointError, StorageError

logger = logging.getLogger(__name__)

MAGIC = b"DTRC"
VERSION = 1
HEADER = struct.Struct("<4sHHQ")
PAYLOAD_DTYPE = np.dtype("<f8")


@dataclass
class CheckpointData:
    hyperparameters: dict
    state: dict[str, np.ndarray]


def encode_checkpoint(state: dict[str, np.ndarray], hyperparameters: dict) -> bytes:
    entries = []
    chunks = []
    offset = 0
    for name in sorted(state):
        array = np.ascontiguousarray(state[name], dtype=PAYLOAD_DTYPE)
        entries.append({"name": name, "shape": list(array.shape), "offset": offset})
        chunks.append(array.tobytes())
        offset += array.nbytes
    manifest = {"hyperparameters": hyperparameters, "arrays": entries, "payload_bytes": offset}
    manifest_bytes = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return HEADER.pack(MAGIC, VERSION, 0, len(manifest_bytes)) + manifest_bytes + b"".join(chunks)


def decode_checkpoint(blob: bytes, source: str = "<bytes>") -> CheckpointData:
    """
    parse a checkpoint container.

    raises:
        CheckpointError: on a bad header, manifest or payload length
    """

    if len(blob) < HEADER.size:
        raise CheckpointError(f"{source}: header needs {HEADER.size} bytes, file has {len(blob)}")
    magic, version, _, manifest_length = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError(f"{source}: expected magic {MAGIC!r}, found {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{source}: expected version {VERSION}, found {version}")
    start = HEADER.size + manifest_length
    if len(blob) < start:
        raise CheckpointError(f"{source}: manifest truncated")
    try:
        manifest = json.loads(blob[HEADER.size:start].decode("utf-8"))
        entries = manifest["arrays"]
        hyperparameters = manifest["hyperparameters"]
        payload_bytes = int(manifest["payload_bytes"])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"{source}: unreadable manifest ({e})")

    payload = blob[start:]
    if len(payload) != payload_bytes:
        raise CheckpointError(f"{source}: payload expected {payload_bytes} bytes, found {len(payload)}")

    state = {}
    for entry in entries:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        end = entry["offset"] + count * PAYLOAD_DTYPE.itemsize
        if entry["offset"] < 0 or end > payload_bytes:
            raise CheckpointError(f"{source}: array {entry['name']} lies outside the payload")
        array = np.frombuffer(payload, dtype=PAYLOAD_DTYPE, count=count, offset=entry["offset"])
        state[entry["name"]] = array.reshape(shape).astype(np.float64)
    return CheckpointData(hyperparameters=hyperparameters, state=state)


def save_checkpoint(path, state: dict[str, np.ndarray], hyperparameters: dict) -> None:
    path = Path(path)
    blob = encode_checkpoint(state, hyperparameters)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(blob)
    except OSError as e:
        raise StorageError(f"cannot write checkpoint to {path}: {e}")
    logger.info(f"saved checkpoint with {len(state)} arrays to {path}")


def load_checkpoint(path) -> CheckpointData:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise StorageError(f"cannot read checkpoint {path}: {e}")
    return decode_checkpoint(blob, str(path))
