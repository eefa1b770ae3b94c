"""Bit-packed sign vectors and multiply-free kernels.

A sign vector with entries in {-1, +1} is stored LSB-first in 64-bit words:
bit ``b`` of word ``u`` holds entry ``64*u + b`` and a set bit means -1.
Pad bits past the logical length are always 0 (i.e. +1), so whole-word
reductions against zero-padded dense buffers are exact.

The vectorized kernels flip signs with ``np.where`` and reduce with ``sum``;
no multiply touches the inner reduction. Each one has a ``*_reference``
twin written as plain scalar loops over words and bits, used by the tests.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._validation import check_matrix, check_tensor, check_vector

WORD_BITS = 64

__all__ = [
    "WORD_BITS",
    "SignVector",
    "SignMatrix",
    "pack_signs",
    "pack_mask",
    "unpack_signs",
    "sgn_vector",
    "signed_dot",
    "signed_dot_reference",
    "sign_inner",
    "matvec_signed",
    "matvec_signed_reference",
    "delta_matvec",
    "rank1_update",
    "axial_contract",
    "axial_contract_reference",
]


def _n_words(size):
    return (size + WORD_BITS - 1) // WORD_BITS


@dataclass(frozen=True, eq=False)
class SignVector:
    """A packed {-1, +1} vector.

    Parameters
    ----------
    size : int
        Number of logical entries.
    words : ndarray of uint64
        ``ceil(size / 64)`` words, LSB-first, set bit encodes -1.
    """

    size: int
    words: np.ndarray = field(repr=False)

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        if words.ndim != 1 or words.shape[0] != _n_words(self.size):
            raise ValueError(
                f"expected {_n_words(self.size)} words for size {self.size}, "
                f"got shape {words.shape}"
            )
        tail = self.size % WORD_BITS
        if tail and int(words[-1]) >> tail:
            raise ValueError("pad bits beyond size must be zero")
        words.flags.writeable = False
        object.__setattr__(self, "words", words)

    def __len__(self):
        return self.size

    def __eq__(self, other):
        if not isinstance(other, SignVector):
            return NotImplemented
        return self.size == other.size and np.array_equal(self.words, other.words)

    def __hash__(self):
        return hash((self.size, self.words.tobytes()))

    def __neg__(self):
        return pack_mask(~self.negative)

    @cached_property
    def negative(self):
        """Boolean mask, True where the entry is -1 (read-only)."""
        raw = self.words.astype("<u8", copy=False).view(np.uint8)
        mask = np.unpackbits(raw, bitorder="little")[: self.size].astype(bool)
        mask.flags.writeable = False
        return mask

    def to_signs(self, dtype=np.int8):
        return unpack_signs(self, dtype=dtype)

    def count_negative(self):
        return int(np.bitwise_count(self.words).sum())

    def to_bytes(self):
        """Little-endian bytes, ``ceil(size / 8)`` of them."""
        raw = self.words.astype("<u8", copy=False).view(np.uint8)
        return raw[: (self.size + 7) // 8].tobytes()

    @classmethod
    def from_bytes(cls, data, size):
        nbytes = (size + 7) // 8
        if len(data) != nbytes:
            raise ValueError(f"expected {nbytes} bytes for size {size}, got {len(data)}")
        padded = np.zeros(_n_words(size) * 8, dtype=np.uint8)
        padded[:nbytes] = np.frombuffer(data, dtype=np.uint8)
        return cls(size, padded.view("<u8").astype(np.uint64))


def pack_mask(negative):
    """Pack a boolean mask (True = -1) into a :class:`SignVector`."""
    negative = np.asarray(negative, dtype=bool).ravel()
    size = negative.shape[0]
    packed = np.packbits(negative, bitorder="little")
    padded = np.zeros(_n_words(size) * 8, dtype=np.uint8)
    padded[: packed.shape[0]] = packed
    sv = SignVector(size, padded.view("<u8").astype(np.uint64))
    # seed the cached unpacked mask; callers pack freshly computed masks often
    mask = negative.copy()
    mask.flags.writeable = False
    sv.__dict__["negative"] = mask
    return sv


def pack_signs(v):
    """Pack a vector of exact -1/+1 entries.

    Raises
    ------
    ValueError
        If any entry is not exactly -1 or +1.
    """
    v = np.asarray(v)
    if v.ndim != 1:
        raise ValueError(f"sign vector must be 1-D, got shape {v.shape}")
    if not np.all((v == 1) | (v == -1)):
        raise ValueError("sign vector entries must be exactly -1 or +1")
    return pack_mask(v == -1)


def unpack_signs(s, dtype=np.int8):
    return np.where(s.negative, -1, 1).astype(dtype)


def sgn_vector(x):
    """Sign pattern of ``x`` with sgn(0) = +1."""
    x = check_vector(x)
    return pack_mask(x < 0)


def _check_len(s, n, what="vector"):
    if s.size != n:
        raise ValueError(f"sign vector has length {s.size}, {what} has length {n}")


def signed_dot(s, x):
    """``sum_i s_i * x_i`` by sign flip and sum."""
    x = np.asarray(x, dtype=np.float64)
    _check_len(s, x.shape[0])
    return float(np.where(s.negative, -x, x).sum())


def signed_dot_reference(s, x):
    """Scalar word-by-word reference for :func:`signed_dot`.

    ``x`` is zero-padded to a whole number of words; pad bits encode +1 so
    the padding contributes exactly zero.
    """
    x = np.asarray(x, dtype=np.float64)
    _check_len(s, x.shape[0])
    padded = np.zeros(len(s.words) * WORD_BITS)
    padded[: s.size] = x
    total = 0.0
    for u, word in enumerate(s.words.tolist()):
        base = u * WORD_BITS
        for b in range(WORD_BITS):
            value = padded[base + b]
            total += -value if (word >> b) & 1 else value
    return total


def sign_inner(s, u):
    """Exact integer ``<s, u>`` of two sign vectors via popcount."""
    _check_len(s, u.size)
    return s.size - 2 * int(np.bitwise_count(s.words ^ u.words).sum())


def matvec_signed(A, t, transpose=False):
    """Product of a dense matrix with a sign vector.

    Returns ``A @ t`` (length m), or ``A.T @ t`` when ``transpose`` is set.
    Each row (column) is reduced by sign flip and sum in a fixed order.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {A.shape}")
    if transpose:
        _check_len(t, A.shape[0], "matrix row count")
        return np.where(t.negative[:, None], -A, A).sum(axis=0)
    _check_len(t, A.shape[1], "matrix column count")
    return np.where(t.negative[None, :], -A, A).sum(axis=1)


def matvec_signed_reference(A, t, transpose=False):
    A = check_matrix(A)
    if transpose:
        A = A.T
    _check_len(t, A.shape[1], "matrix column count")
    return np.array([signed_dot_reference(t, row) for row in A])


def delta_matvec(A, y_prev, t_new, t_old, transpose=False):
    """Update ``y_prev = A @ t_old`` to ``A @ t_new``.

    Only the columns where the sign flipped are read: a +1 -> -1 flip
    subtracts twice the column and a -1 -> +1 flip adds it twice.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {A.shape}")
    if transpose:
        A = A.T
    n = A.shape[1]
    _check_len(t_new, n, "matrix column count")
    _check_len(t_old, n, "matrix column count")
    y_prev = np.asarray(y_prev, dtype=np.float64)
    if y_prev.shape != (A.shape[0],):
        raise ValueError(f"y_prev has shape {y_prev.shape}, expected ({A.shape[0]},)")
    flipped = t_new.negative ^ t_old.negative
    if not flipped.any():
        return y_prev.copy()
    to_neg = flipped & t_new.negative
    to_pos = flipped & t_old.negative
    d = A[:, to_pos].sum(axis=1) - A[:, to_neg].sum(axis=1)
    return y_prev + (d + d)


def rank1_update(R, alpha, s, t):
    """In place ``R -= alpha * outer(s, t)``; returns ``R``.

    The caller must own ``R`` exclusively.
    """
    if not isinstance(R, np.ndarray) or R.dtype != np.float64 or R.ndim != 2:
        raise TypeError("R must be a float64 matrix owned by the caller")
    m, n = R.shape
    _check_len(s, m, "matrix row count")
    _check_len(t, n, "matrix column count")
    alpha = float(alpha)
    if alpha == 0.0:
        return R
    row = np.where(t.negative, -alpha, alpha)
    neg = s.negative
    R[~neg] -= row
    R[neg] += row
    return R


def _signs_by_axis(ndim, axis, signs):
    if not -ndim <= axis < ndim:
        raise ValueError(f"axis {axis} out of range for order {ndim}")
    axis %= ndim
    signs = list(signs)
    if len(signs) != ndim - 1:
        raise ValueError(f"expected {ndim - 1} sign vectors, got {len(signs)}")
    others = [i for i in range(ndim) if i != axis]
    return axis, dict(zip(others, signs))


def axial_contract(a, axis, signs):
    """Contract ``a`` against sign vectors on every axis except ``axis``.

    Parameters
    ----------
    a : ndarray
        Dense tensor of order k.
    axis : int
        The axis that is kept (0-based).
    signs : sequence of SignVector
        One per remaining axis, in increasing axis order.

    Returns
    -------
    ndarray of shape (a.shape[axis],)
    """
    a = np.asarray(a, dtype=np.float64)
    axis, by_axis = _signs_by_axis(a.ndim, axis, signs)
    for ax, s in by_axis.items():
        _check_len(s, a.shape[ax], f"axis {ax}")
    out = a
    # Reduce trailing axes first so the indices of earlier axes stay valid.
    for ax in sorted(by_axis, reverse=True):
        shape = [1] * out.ndim
        shape[ax] = out.shape[ax]
        neg = by_axis[ax].negative.reshape(shape)
        out = np.where(neg, -out, out).sum(axis=ax)
    return np.array(out, dtype=np.float64, copy=True).reshape(a.shape[axis])


def axial_contract_reference(a, axis, signs):
    """Nested-loop oracle for :func:`axial_contract`."""
    a = check_tensor(a)
    axis, by_axis = _signs_by_axis(a.ndim, axis, signs)
    dense = {ax: unpack_signs(s) for ax, s in by_axis.items()}
    out = np.zeros(a.shape[axis])
    for idx in np.ndindex(*a.shape):
        sign = 1
        for ax, v in dense.items():
            sign *= int(v[idx[ax]])
        out[idx[axis]] += sign * a[idx]
    return out


class SignMatrix:
    """Column collection of packed sign vectors sharing one length."""

    def __init__(self, rows, columns=()):
        self.rows = int(rows)
        self.columns = []
        for col in columns:
            self.append(col)

    @property
    def width(self):
        return len(self.columns)

    def __len__(self):
        return len(self.columns)

    def __getitem__(self, j):
        return self.columns[j]

    def __iter__(self):
        return iter(self.columns)

    def __eq__(self, other):
        if not isinstance(other, SignMatrix):
            return NotImplemented
        return self.rows == other.rows and self.columns == other.columns

    def __repr__(self):
        return f"SignMatrix(rows={self.rows}, width={self.width})"

    def append(self, column):
        if column.size != self.rows:
            raise ValueError(f"column has length {column.size}, expected {self.rows}")
        self.columns.append(column)

    def truncated(self, width):
        return SignMatrix(self.rows, self.columns[:width])

    def copy(self):
        return SignMatrix(self.rows, self.columns)

    def negative_mask(self):
        """Boolean ``(rows, width)`` array, True where the entry is -1."""
        if not self.columns:
            return np.zeros((self.rows, 0), dtype=bool)
        return np.stack([c.negative for c in self.columns], axis=1)

    def to_signs(self, dtype=np.int8):
        return np.where(self.negative_mask(), -1, 1).astype(dtype)

    def words(self):
        if not self.columns:
            return np.zeros((0, _n_words(self.rows)), dtype=np.uint64)
        return np.stack([c.words for c in self.columns])

    def inner_with(self, column):
        """Integer ``<column_j, column>`` for every stored column."""
        _check_len(column, self.rows)
        if not self.columns:
            return np.zeros(0, dtype=np.int64)
        flips = np.bitwise_count(self.words() ^ column.words).sum(axis=1)
        return self.rows - 2 * flips.astype(np.int64)

    def gram(self, block=256):
        """Integer Gram matrix ``G[i, j] = <column_i, column_j>``."""
        W = self.words()
        w = W.shape[0]
        G = np.empty((w, w), dtype=np.int64)
        for start in range(0, w, block):
            stop = min(start + block, w)
            flips = np.bitwise_count(W[start:stop, None, :] ^ W[None, :, :]).sum(axis=2)
            G[start:stop] = self.rows - 2 * flips.astype(np.int64)
        return G
