"""Storage accounting, width planning, error curves and half-precision baselines."""

import csv
import io
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._validation import check_count, check_tensor

__all__ = [
    "StorageModel",
    "CurvePoint",
    "compression_rate",
    "width_for_compression",
    "relative_error",
    "image_error_denominator",
    "quantize_half",
    "HALF_FORMATS",
    "emit_curve",
    "write_curve_csv",
    "read_curve_csv",
    "CURVE_COLUMNS",
]

CURVE_COLUMNS = ("width", "compression_rate", "relative_error")


@dataclass(frozen=True)
class StorageModel:
    """Bit accounting for a decomposition of a tensor of ``shape``.

    A term stores one sign bit per entry of every signed axis plus
    ``coeff_bits`` per coefficient. With ``channel_axis`` set that axis
    carries one coefficient per channel instead of sign bits.
    """

    shape: tuple
    coeff_bits: int = 32
    source_bits: int = 16
    channel_axis: int | None = None

    def __post_init__(self):
        shape = tuple(check_count(n, "shape entry", minimum=1) for n in self.shape)
        if not shape:
            raise ValueError("shape must be non-empty")
        object.__setattr__(self, "shape", shape)
        check_count(self.coeff_bits, "coeff_bits", minimum=1)
        check_count(self.source_bits, "source_bits", minimum=1)
        if self.channel_axis is not None:
            object.__setattr__(self, "channel_axis", self.channel_axis % len(shape))

    @property
    def term_bits(self):
        if self.channel_axis is None:
            return self.coeff_bits + sum(self.shape)
        q = self.shape[self.channel_axis]
        return q * self.coeff_bits + sum(self.shape) - q

    @property
    def source_total_bits(self):
        return self.source_bits * math.prod(self.shape)


@dataclass(frozen=True)
class CurvePoint:
    k: int
    p_k: float
    r_k: float


def compression_rate(k, model):
    """Stored bits of a width-``k`` decomposition over stored bits of the source."""
    k = check_count(k, "k")
    return k * model.term_bits / model.source_total_bits


def width_for_compression(shape, model, rate):
    """Largest width whose compression rate does not exceed ``rate``.

    ``shape`` overrides ``model.shape`` when given.
    """
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    if shape is not None and tuple(shape) != model.shape:
        model = StorageModel(tuple(shape), model.coeff_bits, model.source_bits, model.channel_axis)
    # exact rational arithmetic; the 2**-40 nudge absorbs the rounding of a
    # rate that was itself computed as a float quotient
    exact = Fraction(float(rate)) * model.source_total_bits / model.term_bits
    return math.floor(exact * (1 + Fraction(1, 2**40)))


def image_error_denominator(shape, maxval=255):
    """``maxval * sqrt(prod(shape))``, e.g. ``255 * sqrt(3 m n)`` for RGB images."""
    return maxval * math.sqrt(math.prod(shape))


def relative_error(A, B, denominator=None):
    """``||A - B||_F / ||A||_F``, or over a fixed ``denominator`` when given."""
    A = check_tensor(A, name="A")
    B = check_tensor(B, name="B")
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    denom = float(np.linalg.norm(A)) if denominator is None else float(denominator)
    if denom == 0.0:
        raise ZeroDivisionError("relative error undefined for a zero denominator")
    return float(np.linalg.norm(A - B)) / denom


@dataclass(frozen=True)
class _HalfFormat:
    fraction_bits: int
    min_exponent: int  # exponent of the smallest normal
    max_exponent: int

    @property
    def max_finite(self):
        return (2.0 - 2.0 ** -self.fraction_bits) * 2.0**self.max_exponent


HALF_FORMATS = {
    "bf16": _HalfFormat(7, -126, 127),
    "f16": _HalfFormat(10, -14, 15),
}


def quantize_half(A, fmt="bf16", *, return_saturated=False):
    """Round every entry to the nearest ``bf16`` or ``f16`` value, ties to even.

    Subnormals are rounded faithfully. Values beyond the largest finite
    number saturate to it; a warning reports how many did.

    Returns
    -------
    ndarray of float64
        The rounded values, widened back.
    int
        Number of saturated entries, if ``return_saturated``.
    """
    try:
        spec = HALF_FORMATS[fmt]
    except KeyError:
        raise ValueError(f"unknown format {fmt!r}, expected one of {sorted(HALF_FORMATS)}")
    scalar = np.ndim(A) == 0
    A = check_tensor(np.atleast_1d(A), name="A")
    _, exp = np.frexp(A)
    # frexp gives |x| = m * 2**exp with m in [0.5, 1), so floor(log2|x|) = exp - 1
    exponent = np.maximum(exp - 1, spec.min_exponent)
    ulp = np.ldexp(1.0, exponent - spec.fraction_bits)
    out = np.rint(A / ulp) * ulp
    over = np.abs(out) > spec.max_finite
    n_saturated = int(over.sum())
    if n_saturated:
        out = np.where(over, np.copysign(spec.max_finite, A), out)
        warnings.warn(f"{n_saturated} entries saturated to the {fmt} range", RuntimeWarning)
    if scalar:
        out = out.reshape(())
    if return_saturated:
        return out, n_saturated
    return out


def emit_curve(report, model):
    """One :class:`CurvePoint` per recorded width, starting at width 0."""
    errors = report.relative_errors
    return [
        CurvePoint(int(k), compression_rate(int(k), model), float(r))
        for k, r in zip(report.widths, errors)
    ]


def write_curve_csv(points, fh=None):
    """Write points with full-precision floats; returns the text if ``fh`` is None."""
    out = fh if fh is not None else io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CURVE_COLUMNS)
    for p in points:
        writer.writerow([p.k, repr(float(p.p_k)), repr(float(p.r_k))])
    if fh is None:
        return out.getvalue()


def read_curve_csv(fh):
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    reader = csv.reader(fh)
    header = next(reader)
    if tuple(header) != CURVE_COLUMNS:
        raise ValueError(f"unexpected curve header {header}")
    return [CurvePoint(int(k), float(p), float(r)) for k, p, r in reader]
