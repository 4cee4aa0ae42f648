"""Versioned binary checkpoints.

Layout (all little-endian)::

    magic   8 bytes  b"DGLESCKP"
    version u32
    hlen    u32      length of the JSON header
    header  hlen     scalars, array names/shapes, config text
    arrays           float64 '<f8', in header order
    digest  32 bytes sha256 of everything above

Files are written to a temporary sibling and renamed, so a crash never
leaves a partial checkpoint under the target name.
"""

import hashlib
import json
import os
import struct
import tempfile

import numpy as np

from .errors import CheckpointError

MAGIC = b"DGLESCKP"
VERSION = 1
_DIGEST = 32


def write_checkpoint(path, arrays, scalars=None, text=""):
    """Write ``{name: float array}`` plus JSON-serialisable scalars."""
    names = list(arrays)
    header = {
        "arrays": [[n, list(np.shape(arrays[n]))] for n in names],
        "scalars": scalars or {},
        "text": text,
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    parts = [MAGIC, struct.pack("<II", VERSION, len(hbytes)), hbytes]
    for n in names:
        parts.append(np.ascontiguousarray(arrays[n], dtype="<f8").tobytes())
    body = b"".join(parts)
    payload = body + hashlib.sha256(body).digest()
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".ckpt-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_checkpoint(path, expect=None):
    """Return ``(arrays, scalars, text)``.

    ``expect`` maps array names to required shapes; any mismatch, a bad
    checksum, an unknown version or truncation raises :class:`CheckpointError`.
    """
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(data) < len(MAGIC) + 8 + _DIGEST or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch (file corrupt or truncated)")
    version, hlen = struct.unpack_from("<II", body, len(MAGIC))
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version} (expected {VERSION})")
    off = len(MAGIC) + 8
    try:
        header = json.loads(body[off : off + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header") from exc
    off += hlen
    arrays = {}
    for name, shape in header["arrays"]:
        count = int(np.prod(shape, dtype=np.int64))
        end = off + 8 * count
        if end > len(body):
            raise CheckpointError(f"{path}: array {name} truncated")
        arrays[name] = np.frombuffer(body, dtype="<f8", count=count, offset=off).reshape(shape).astype(float)
        off = end
    if off != len(body):
        raise CheckpointError(f"{path}: trailing bytes after arrays")
    for name, shape in (expect or {}).items():
        if name not in arrays:
            raise CheckpointError(f"{path}: missing array {name}")
        if tuple(arrays[name].shape) != tuple(shape):
            raise CheckpointError(
                f"{path}: array {name} has shape {arrays[name].shape}, expected {tuple(shape)}"
            )
    return arrays, header["scalars"], header["text"]
