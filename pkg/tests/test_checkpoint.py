import struct

import numpy as np
import pytest

from dgles.checkpoint import MAGIC, read_checkpoint, write_checkpoint
from dgles.errors import CheckpointError


@pytest.fixture
def ckpt(tmp_path, rng):
    arrays = {"U": rng.standard_normal((3, 4, 5)), "s": np.arange(6.0)}
    path = tmp_path / "a.ckpt"
    write_checkpoint(path, arrays, {"t": 1.25, "step": 7}, "gas.Ma = 0.7\n")
    return path, arrays


def test_round_trip_bitwise(ckpt, tmp_path):
    path, arrays = ckpt
    got, scalars, text = read_checkpoint(path, expect={"U": (3, 4, 5)})
    for k in arrays:
        assert got[k].tobytes() == arrays[k].tobytes()
    assert scalars == {"t": 1.25, "step": 7} and text == "gas.Ma = 0.7\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["a.ckpt"]


def test_corruption_detected(ckpt):
    path, _ = ckpt
    raw = bytearray(path.read_bytes())
    raw[-40] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="checksum"):
        read_checkpoint(path)


def test_truncation_detected(ckpt):
    path, _ = ckpt
    path.write_bytes(path.read_bytes()[:-50])
    with pytest.raises(CheckpointError):
        read_checkpoint(path)


def test_bad_magic_and_missing(tmp_path):
    p = tmp_path / "x.ckpt"
    p.write_bytes(b"NOTACKPT" + b"\0" * 64)
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        read_checkpoint(p)
    with pytest.raises(CheckpointError):
        read_checkpoint(tmp_path / "missing.ckpt")


def test_version_mismatch(ckpt):
    import hashlib

    path, _ = ckpt
    body = bytearray(path.read_bytes()[:-32])
    body[len(MAGIC):len(MAGIC) + 4] = struct.pack("<I", 99)
    path.write_bytes(bytes(body) + hashlib.sha256(bytes(body)).digest())
    with pytest.raises(CheckpointError, match="version 99"):
        read_checkpoint(path)


def test_shape_expectation(ckpt):
    path, _ = ckpt
    with pytest.raises(CheckpointError):
        read_checkpoint(path, expect={"U": (3, 4, 6)})
    with pytest.raises(CheckpointError, match="missing"):
        read_checkpoint(path, expect={"V": (1,)})
