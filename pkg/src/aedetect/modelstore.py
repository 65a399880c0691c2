"""Binary model files.

Layout (little-endian throughout)::

    8s   magic  b"AEDETECT"
    u32  version (1)
    u32  d
    u32  h
    f64  l1_lambda
    f64[d] norm min, f64[d] norm max
    f64[h*d] W1 (row-major), f64[h] b1
    f64[d*h] W2 (row-major), f64[d] b2
    u8   profile flag (0 or 1)
    -- when the flag is 1:
    u16  node_id length, utf-8 node_id
    f64  theta, f64 percentile_n, f64 train_error_mean
    --
    u32  CRC32 of every preceding byte
"""

from __future__ import annotations

import io
import os
import struct
import zlib
from pathlib import Path

import numpy as np

from .autoencoder import AutoencoderModel
from .dataprep import NormStats
from .detector import DetectorProfile

MAGIC = b"AEDETECT"
VERSION = 1
_HEADER = struct.Struct("<8sIIId")
_PROFILE_FIXED = struct.Struct("<ddd")


class ModelFileError(Exception):
    """Base class for unreadable model files."""


class BadMagicError(ModelFileError):
    pass


class UnsupportedVersionError(ModelFileError):
    pass


class ChecksumError(ModelFileError):
    pass


class TruncatedFileError(ModelFileError):
    pass


def _f64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def dumps(model: AutoencoderModel, profile: DetectorProfile | None = None) -> bytes:
    if not model.is_finite():
        raise ValueError("refusing to save a model with non-finite parameters")
    if model.norm is None:
        raise ValueError("model has no normalization statistics")
    buf = io.BytesIO()
    buf.write(_HEADER.pack(MAGIC, VERSION, model.d, model.h, float(model.l1_lambda)))
    for arr in (model.norm.min, model.norm.max, model.W1, model.b1, model.W2, model.b2):
        buf.write(_f64(arr))
    if profile is None:
        buf.write(b"\x00")
    else:
        values = (profile.theta, profile.percentile_n, profile.train_error_mean)
        if not all(np.isfinite(values)):
            raise ValueError("detector profile has non-finite fields")
        name = profile.node_id.encode("utf-8")
        buf.write(b"\x01")
        buf.write(struct.pack("<H", len(name)))
        buf.write(name)
        buf.write(_PROFILE_FIXED.pack(*values))
    payload = buf.getvalue()
    return payload + struct.pack("<I", zlib.crc32(payload))


def save(model: AutoencoderModel, profile: DetectorProfile | None, path) -> Path:
    path = Path(path)
    data = dumps(model, profile)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
    return path


def _expected_size(data: bytes, d: int, h: int) -> int:
    """Total file size implied by the header, or raise if it cannot be known yet."""
    flag_at = _HEADER.size + 8 * (2 * d + 2 * h * d + h + d)
    if len(data) <= flag_at:
        raise TruncatedFileError("file ends inside the parameter block")
    flag = data[flag_at]
    if flag == 0:
        return flag_at + 1 + 4
    if flag != 1:
        # a corrupted flag byte; let the checksum report it
        return len(data)
    if len(data) < flag_at + 3:
        raise TruncatedFileError("file ends inside the detector profile")
    (name_len,) = struct.unpack_from("<H", data, flag_at + 1)
    return flag_at + 3 + name_len + _PROFILE_FIXED.size + 4


def loads(data: bytes) -> tuple[AutoencoderModel, DetectorProfile | None]:
    if len(data) < len(MAGIC):
        if MAGIC.startswith(data):
            raise TruncatedFileError("file ends inside the magic bytes")
        raise BadMagicError("not a model file")
    if data[: len(MAGIC)] != MAGIC:
        raise BadMagicError("not a model file (bad magic)")
    if len(data) < _HEADER.size:
        raise TruncatedFileError("file ends inside the header")
    _, version, d, h, l1_lambda = _HEADER.unpack_from(data)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported model file version {version}")
    expected = _expected_size(data, d, h)
    if len(data) < expected:
        raise TruncatedFileError(f"file has {len(data)} bytes, header implies {expected}")
    if len(data) > expected:
        raise ChecksumError(f"{len(data) - expected} unexpected trailing bytes")
    (stored,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != stored:
        raise ChecksumError("checksum mismatch")

    pos = _HEADER.size

    def take(count, shape=None):
        nonlocal pos
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=pos).astype(np.float64)
        pos += 8 * count
        return arr.reshape(shape) if shape else arr

    norm = NormStats(take(d), take(d))
    model = AutoencoderModel(
        W1=take(h * d, (h, d)), b1=take(h), W2=take(d * h, (d, h)), b2=take(d),
        norm=norm, l1_lambda=l1_lambda,
    )
    flag = data[pos]
    pos += 1
    profile = None
    if flag == 1:
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        theta, n, mean = _PROFILE_FIXED.unpack_from(data, pos)
        profile = DetectorProfile(node_id=name, theta=theta, percentile_n=n, train_error_mean=mean)
    elif flag != 0:
        raise ModelFileError(f"bad profile flag {flag}")
    return model.freeze(), profile


def load(path) -> tuple[AutoencoderModel, DetectorProfile | None]:
    with open(path, "rb") as fh:
        return loads(fh.read())
