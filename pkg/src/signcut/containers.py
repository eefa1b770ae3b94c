"""Binary containers: SCD decompositions, DTEN dense tensors and P6 PPM images.

All integers and floats are little-endian regardless of host.

SCD layout::

    b"SCD1"
    u8   order k
    u8   channel_mode        0 = signs on every axis, 1 = scalar channel axis
    u8   channel_axis        only present when channel_mode == 1
    u64  shape[k]
    u64  width
    u8   coeff_bits          32 or 64
    f32|f64 coefficients     width terms, q per term in channel mode
    sign planes              term-major: for each term, for each signed axis,
                             ceil(n_i / 8) bytes, LSB-first, bit 1 = -1

Because both the coefficients and the sign planes are ordered by term, the
first ``w'`` terms of a file form a valid width-``w'`` file
(:func:`truncate_scd`).

DTEN layout::

    b"DTEN"  u8 order  u64 shape[k]  u8 dtype (0 f32, 1 f64, 2 u8)  payload
"""

import math
import re
import struct

import numpy as np

from .decompose import CutDecomposition
from .kernels import SignMatrix, SignVector

__all__ = [
    "FormatError",
    "write_scd",
    "read_scd",
    "truncate_scd",
    "scd_size",
    "write_raw",
    "read_raw",
    "read_ppm",
    "write_ppm",
    "save_scd",
    "load_scd",
    "save_raw",
    "load_raw",
    "DTYPE_TAGS",
]

SCD_MAGIC = b"SCD1"
DTEN_MAGIC = b"DTEN"
DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("u1")}
_DTYPE_NAMES = {"f32": 0, "f64": 1, "u8": 2}
_MAX_ENTRIES = 2**63 - 1


class FormatError(ValueError):
    """Malformed, truncated or unsupported file contents."""


class _Reader:
    def __init__(self, data):
        self.data = memoryview(bytes(data))
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated payload while reading {what}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, what):
        size = struct.calcsize(fmt)
        return struct.unpack(fmt, self.take(size, what))


def _header_size(order, channel_mode):
    return 4 + 1 + 1 + (1 if channel_mode else 0) + 8 * order + 8 + 1


def scd_size(shape, width, coeff_bits=64, channel_axis=None):
    """Exact byte size of an SCD file."""
    k = len(shape)
    q = 1 if channel_axis is None else shape[channel_axis % k]
    signed = [n for i, n in enumerate(shape) if channel_axis is None or i != channel_axis % k]
    return (
        _header_size(k, channel_axis is not None)
        + width * q * (coeff_bits // 8)
        + width * sum((n + 7) // 8 for n in signed)
    )


def write_scd(d, coeff_bits=64):
    """Serialize a :class:`CutDecomposition`.

    With ``coeff_bits=32`` coefficients are rounded to float32.
    """
    if coeff_bits not in (32, 64):
        raise ValueError(f"coeff_bits must be 32 or 64, got {coeff_bits}")
    k = len(d.shape)
    if k > 255:
        raise ValueError("order must fit in one byte")
    mode = 0 if d.channel_axis is None else 1
    out = bytearray(SCD_MAGIC)
    out += struct.pack("<BB", k, mode)
    if mode:
        out += struct.pack("<B", d.channel_axis)
    out += struct.pack(f"<{k}Q", *d.shape)
    out += struct.pack("<QB", d.width, coeff_bits)
    dtype = "<f4" if coeff_bits == 32 else "<f8"
    out += np.ascontiguousarray(d.coefficients, dtype=dtype).tobytes()
    for j in range(d.width):
        for f in d.factors:
            out += f[j].to_bytes()
    return bytes(out)


def _read_scd_header(r):
    if bytes(r.take(4, "magic")) != SCD_MAGIC:
        raise FormatError("bad magic, expected SCD1")
    k, mode = r.unpack("<BB", "header")
    if k == 0:
        raise FormatError("order must be at least 1")
    if mode not in (0, 1):
        raise FormatError(f"unknown channel_mode {mode}")
    channel_axis = None
    if mode:
        (channel_axis,) = r.unpack("<B", "channel axis")
        if channel_axis >= k:
            raise FormatError(f"channel axis {channel_axis} out of range for order {k}")
    shape = r.unpack(f"<{k}Q", "shape")
    if any(n == 0 for n in shape):
        raise FormatError(f"empty axis in shape {shape}")
    if math.prod(shape) > _MAX_ENTRIES:
        raise FormatError(f"shape {shape} overflows 63-bit entry count")
    width, coeff_bits = r.unpack("<QB", "width")
    if coeff_bits not in (32, 64):
        raise FormatError(f"unsupported coeff_bits {coeff_bits}")
    return shape, channel_axis, width, coeff_bits


def read_scd(data, width=None):
    """Parse an SCD file, optionally keeping only the first ``width`` terms."""
    r = _Reader(data)
    shape, channel_axis, stored, coeff_bits = _read_scd_header(r)
    keep = stored if width is None else min(int(width), stored)
    q = 1 if channel_axis is None else shape[channel_axis]
    dtype = np.dtype("<f4" if coeff_bits == 32 else "<f8")
    if len(r.data) < scd_size(shape, stored, coeff_bits, channel_axis):
        raise FormatError("truncated payload")
    raw = r.take(stored * q * dtype.itemsize, "coefficients")
    coeffs = np.frombuffer(raw, dtype=dtype).astype(np.float64)
    coeffs = coeffs.reshape((stored, q) if channel_axis is not None else (stored,))[:keep]
    axes = [i for i in range(len(shape)) if i != channel_axis]
    factors = [SignMatrix(shape[i]) for i in axes]
    for _ in range(keep):
        for i, f in zip(axes, factors):
            nbytes = (shape[i] + 7) // 8
            try:
                f.append(SignVector.from_bytes(bytes(r.take(nbytes, "sign planes")), shape[i]))
            except ValueError as exc:
                raise FormatError(str(exc)) from exc
    if width is None and r.pos != len(r.data):
        raise FormatError(f"{len(r.data) - r.pos} trailing bytes")
    return CutDecomposition(shape, factors, coeffs.copy(), channel_axis)


def truncate_scd(data, width):
    """Bytes of a valid SCD file holding the first ``width`` terms of ``data``."""
    d = read_scd(data, width)
    coeff_bits = data[_header_size(len(d.shape), d.channel_axis is not None) - 1]
    return write_scd(d, coeff_bits)


def write_raw(a, dtype="f64"):
    """Serialize a dense tensor as DTEN; ``dtype`` is one of f32, f64, u8."""
    try:
        tag = _DTYPE_NAMES[dtype]
    except KeyError:
        raise ValueError(f"dtype must be one of {sorted(_DTYPE_NAMES)}, got {dtype!r}")
    a = np.asarray(a)
    if a.ndim == 0 or a.ndim > 255:
        raise ValueError("order must be between 1 and 255")
    if any(n == 0 for n in a.shape):
        raise ValueError(f"empty axis in shape {a.shape}")
    target = DTYPE_TAGS[tag]
    if target.kind == "u" and (
        not np.all(np.isfinite(a)) or np.any(a < 0) or np.any(a > 255) or np.any(a != np.round(a))
    ):
        raise ValueError("u8 payload requires integers in [0, 255]")
    out = bytearray(DTEN_MAGIC)
    out += struct.pack("<B", a.ndim)
    out += struct.pack(f"<{a.ndim}Q", *a.shape)
    out += struct.pack("<B", tag)
    out += np.ascontiguousarray(a, dtype=target).tobytes()
    return bytes(out)


def read_raw(data, return_dtype=False):
    """Parse a DTEN file into a float64 array (f32 and u8 payloads are widened)."""
    r = _Reader(data)
    if bytes(r.take(4, "magic")) != DTEN_MAGIC:
        raise FormatError("bad magic, expected DTEN")
    (k,) = r.unpack("<B", "order")
    if k == 0:
        raise FormatError("order must be at least 1")
    shape = r.unpack(f"<{k}Q", "shape")
    if any(n == 0 for n in shape):
        raise FormatError(f"empty axis in shape {shape}")
    if math.prod(shape) > _MAX_ENTRIES:
        raise FormatError(f"shape {shape} overflows 63-bit entry count")
    (tag,) = r.unpack("<B", "dtype")
    if tag not in DTYPE_TAGS:
        raise FormatError(f"unknown dtype tag {tag}")
    dtype = DTYPE_TAGS[tag]
    expected = math.prod(shape) * dtype.itemsize
    remaining = len(r.data) - r.pos
    if remaining != expected:
        raise FormatError(f"payload has {remaining} bytes, expected {expected}")
    arr = np.frombuffer(r.take(expected, "payload"), dtype=dtype).reshape(shape)
    out = arr.astype(np.float64)
    if return_dtype:
        name = {v: k for k, v in _DTYPE_NAMES.items()}[tag]
        return out, name
    return out


_PPM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


def read_ppm(data):
    """Parse a binary P6 image with maxval 255 into an ``(h, w, 3)`` float array."""
    data = bytes(data)
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PPM_TOKEN.match(data, pos)
        if m is None:
            raise FormatError("truncated PPM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P6":
        raise FormatError(f"expected P6 magic, got {tokens[0][:8]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise FormatError("non-integer PPM header field")
    if maxval != 255:
        raise FormatError(f"only maxval 255 is supported, got {maxval}")
    if width <= 0 or height <= 0:
        raise FormatError("PPM dimensions must be positive")
    if pos >= len(data) or data[pos:pos + 1] not in (b" ", b"\t", b"\n", b"\r", b"\x0b", b"\x0c"):
        raise FormatError("missing whitespace after PPM header")
    pos += 1
    n = width * height * 3
    payload = data[pos:pos + n]
    if len(payload) != n:
        raise FormatError(f"short PPM payload: {len(payload)} of {n} bytes")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).astype(np.float64)


def _to_bytes(a):
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("image values must be finite")
    a = np.clip(a, 0.0, 255.0)
    # clipped values are nonnegative, so floor(x + 0.5) rounds half away from zero
    return np.floor(a + 0.5).astype(np.uint8)


def write_ppm(a):
    """Encode an ``(h, w, 3)`` tensor as P6, clamping to [0, 255] and rounding."""
    a = np.asarray(a)
    if a.ndim != 3 or a.shape[2] != 3 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValueError(f"expected an (h, w, 3) image, got shape {a.shape}")
    h, w, _ = a.shape
    return b"P6\n%d %d\n255\n" % (w, h) + _to_bytes(a).tobytes()


def save_scd(path, d, coeff_bits=64):
    with open(path, "wb") as fh:
        fh.write(write_scd(d, coeff_bits))


def load_scd(path, width=None):
    with open(path, "rb") as fh:
        return read_scd(fh.read(), width)


def save_raw(path, a, dtype="f64"):
    with open(path, "wb") as fh:
        fh.write(write_raw(a, dtype))


def load_raw(path, return_dtype=False):
    with open(path, "rb") as fh:
        return read_raw(fh.read(), return_dtype)
