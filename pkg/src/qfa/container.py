"""Binary container for intermediate arrays.

Layout (little-endian throughout):

    magic    4 bytes  b"QFA1"
    version  u16      currently 1
    kind     u16      1=qdft 2=qser 3=qacf 4=qspec
    subkind  u16      qspec only: 1=periodogram 2=lw-estimate 3=truth
                      4=smoothed; 0 otherwise
    reserved u16      zero
    m        u64      series count
    L        u64      level count
    dim3     u64      n for time/lag kinds, V for qspec
    levels   L * f64
    freqs    V * f64  qspec only
    payload  f64 row-major; complex interleaved (re, im)

Payload contents per kind: qdft stores the complex (m, L, n) transform;
qser the real (m, L, n) series then the (m, L) means; qacf the real
(m, m, L, n) covariances; qspec the complex (L, V, m, m) field.
"""

import struct

import numpy as np

from .arrays import QacfArray, QdftArray, QSpecMatrix, QuantileSeriesArray
from .errors import ValidationError

MAGIC = b"QFA1"
VERSION = 1

KIND_CODES = {"qdft": 1, "qser": 2, "qacf": 3, "qspec": 4}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}
SUBKIND_CODES = {"periodogram": 1, "lw-estimate": 2, "truth": 3, "smoothed": 4}
SUBKIND_NAMES = {v: k for k, v in SUBKIND_CODES.items()}

_HEADER = struct.Struct("<4sHHHHQQQ")


def container_kind(obj):
    if isinstance(obj, QdftArray):
        return "qdft"
    if isinstance(obj, QuantileSeriesArray):
        return "qser"
    if isinstance(obj, QacfArray):
        return "qacf"
    if isinstance(obj, QSpecMatrix):
        return "qspec"
    raise ValidationError(f"cannot store objects of type {type(obj).__name__}")


def write_container(path, obj):
    """Serialize one pipeline array to path."""
    kind = container_kind(obj)
    subkind = SUBKIND_CODES[obj.kind] if kind == "qspec" else 0
    if kind == "qdft":
        m, L, dim3 = obj.z.shape
        payload = _complex_bytes(obj.z)
    elif kind == "qser":
        m, L, dim3 = obj.x.shape
        payload = _real_bytes(obj.x) + _real_bytes(obj.xbar)
    elif kind == "qacf":
        m, _, L, dim3 = obj.gamma.shape
        payload = _real_bytes(obj.gamma)
    else:
        L, dim3, m, _ = obj.s.shape
        payload = _complex_bytes(obj.s)
    header = _HEADER.pack(MAGIC, VERSION, KIND_CODES[kind], subkind, 0, m, L, dim3)
    levels = np.ascontiguousarray(obj.levels, dtype="<f8").tobytes()
    freqs = b""
    if kind == "qspec":
        freqs = np.ascontiguousarray(obj.freqs, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(levels)
        fh.write(freqs)
        fh.write(payload)


def read_container(path):
    """Read a container back into its array type."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValidationError(f"{path}: truncated container header")
    magic, version, kind_code, subkind, _, m, L, dim3 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ValidationError(f"{path}: unsupported version {version}")
    if kind_code not in KIND_NAMES:
        raise ValidationError(f"{path}: unknown kind code {kind_code}")
    kind = KIND_NAMES[kind_code]
    off = _HEADER.size
    levels, off = _read_f64(raw, off, L, path)
    if kind == "qdft":
        z, off = _read_c128(raw, off, (m, L, dim3), path)
        _expect_end(raw, off, path)
        return QdftArray(z=z, levels=levels)
    if kind == "qser":
        x, off = _read_f64_shaped(raw, off, (m, L, dim3), path)
        xbar, off = _read_f64_shaped(raw, off, (m, L), path)
        _expect_end(raw, off, path)
        return QuantileSeriesArray(x=x, xbar=xbar, levels=levels)
    if kind == "qacf":
        gamma, off = _read_f64_shaped(raw, off, (m, m, L, dim3), path)
        _expect_end(raw, off, path)
        return QacfArray(gamma=gamma, levels=levels)
    freqs, off = _read_f64(raw, off, dim3, path)
    s, off = _read_c128(raw, off, (L, dim3, m, m), path)
    _expect_end(raw, off, path)
    if subkind not in SUBKIND_NAMES:
        raise ValidationError(f"{path}: unknown qspec subkind {subkind}")
    return QSpecMatrix(s=s, freqs=freqs, levels=levels, kind=SUBKIND_NAMES[subkind])


def _complex_bytes(arr):
    a = np.ascontiguousarray(arr, dtype=complex)
    inter = np.empty(a.shape + (2,), dtype="<f8")
    inter[..., 0] = a.real
    inter[..., 1] = a.imag
    return inter.tobytes()


def _real_bytes(arr):
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def _read_f64(raw, off, count, path):
    nbytes = 8 * count
    if off + nbytes > len(raw):
        raise ValidationError(f"{path}: truncated container payload")
    vals = np.frombuffer(raw, dtype="<f8", count=count, offset=off).copy()
    return vals, off + nbytes


def _read_f64_shaped(raw, off, shape, path):
    count = int(np.prod(shape))
    vals, off = _read_f64(raw, off, count, path)
    return vals.reshape(shape), off


def _read_c128(raw, off, shape, path):
    count = int(np.prod(shape)) * 2
    vals, off = _read_f64(raw, off, count, path)
    vals = vals.reshape(shape + (2,))
    return vals[..., 0] + 1j * vals[..., 1], off


def _expect_end(raw, off, path):
    if off != len(raw):
        raise ValidationError(f"{path}: payload length mismatch")
