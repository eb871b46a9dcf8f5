"""Parametric fixed-point formats and saturating arithmetic.

Formats follow the ``[sT.W]`` / ``[uT.W]`` notation: ``T`` total bits of which
``W`` are fractional, ``s``/``u`` for two's-complement signed or unsigned.
A :class:`FixedValue` stores the raw integer code; its real value is
``raw * 2**-frac_bits`` exactly.

Every operation saturates into the requested output format. Dropped
fractional bits are truncated toward minus infinity (``floor``) unless a
``rounding="half_even"`` mode is requested. Raw codes are Python ints, so no
intermediate product or sum can overflow before the explicit saturation.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational, Real

import numpy as np

FLOOR = "floor"
HALF_EVEN = "half_even"
ROUNDING_MODES = (FLOOR, HALF_EVEN)

_FORMAT_RE = re.compile(r"^\s*([su])(\d+)\.(\d+)\s*$")


class FixedPointError(ValueError):
    """Contract violation in a fixed-point operation (format mismatch, NaN...)."""


@dataclass(frozen=True, slots=True)
class FixedFormat:
    total_bits: int
    frac_bits: int
    signed: bool = True

    def __post_init__(self):
        if not 1 <= self.total_bits <= 64:
            raise FixedPointError(f"total_bits must be in [1, 64], got {self.total_bits}")
        top = self.total_bits - (1 if self.signed else 0)
        if not 0 <= self.frac_bits <= top:
            raise FixedPointError(
                f"frac_bits must be in [0, {top}] for {self.total_bits}-bit "
                f"{'signed' if self.signed else 'unsigned'}, got {self.frac_bits}"
            )

    @classmethod
    def parse(cls, text: str) -> "FixedFormat":
        """Parse ``"s9.8"`` / ``"u8.8"`` notation."""
        m = _FORMAT_RE.match(text)
        if m is None:
            raise FixedPointError(f"cannot parse fixed-point format {text!r}")
        sign, total, frac = m.groups()
        return cls(int(total), int(frac), sign == "s")

    @property
    def int_bits(self) -> int:
        return self.total_bits - self.frac_bits - (1 if self.signed else 0)

    @property
    def min_raw(self) -> int:
        return -(1 << (self.total_bits - 1)) if self.signed else 0

    @property
    def max_raw(self) -> int:
        if self.signed:
            return (1 << (self.total_bits - 1)) - 1
        return (1 << self.total_bits) - 1

    @property
    def lsb(self) -> float:
        return 2.0 ** -self.frac_bits

    @property
    def min_value(self) -> float:
        return self.min_raw * self.lsb

    @property
    def max_value(self) -> float:
        return self.max_raw * self.lsb

    def saturate(self, raw: int) -> int:
        return min(max(raw, self.min_raw), self.max_raw)

    def widened(self, extra_bits: int = 1) -> "FixedFormat":
        return FixedFormat(self.total_bits + extra_bits, self.frac_bits, self.signed)

    def __str__(self) -> str:
        return f"{'s' if self.signed else 'u'}{self.total_bits}.{self.frac_bits}"


def signed(total_bits: int, frac_bits: int) -> FixedFormat:
    return FixedFormat(total_bits, frac_bits, True)


def unsigned(total_bits: int, frac_bits: int) -> FixedFormat:
    return FixedFormat(total_bits, frac_bits, False)


@dataclass(frozen=True, slots=True)
class FixedValue:
    raw: int
    format: FixedFormat

    def __post_init__(self):
        if not self.format.min_raw <= self.raw <= self.format.max_raw:
            raise FixedPointError(f"raw code {self.raw} does not fit {self.format}")

    @property
    def value(self) -> float:
        # exact for every in-scope width: raw < 2**53 or a power-of-two scaled float
        return math.ldexp(self.raw, -self.format.frac_bits)

    def as_fraction(self) -> Fraction:
        return Fraction(self.raw, 1 << self.format.frac_bits)

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        return f"FixedValue({self.value!r} [{self.format}], raw={self.raw})"


def _check_mode(rounding: str) -> None:
    if rounding not in ROUNDING_MODES:
        raise FixedPointError(f"unknown rounding mode {rounding!r}")


def round_div_pow2(num: int, shift: int, rounding: str = FLOOR) -> int:
    """``num / 2**shift`` rounded to an integer; negative ``shift`` scales up."""
    if shift <= 0:
        return num << -shift
    q = num >> shift  # Python >> on ints is floor division
    if rounding == FLOOR:
        return q
    rem = num - (q << shift)
    half = 1 << (shift - 1)
    if rem > half or (rem == half and q & 1):
        q += 1
    return q


def _as_rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, (float, np.floating, Real)):
        xf = float(x)
        if math.isnan(xf):
            raise FixedPointError("cannot quantize NaN")
        if math.isinf(xf):
            raise OverflowError
        return Fraction(xf)
    raise TypeError(f"cannot quantize {type(x).__name__}")


def quantize(x, fmt: FixedFormat, rounding: str = FLOOR) -> FixedValue:
    """Quantize a real (float, int, Fraction or decimal string) into ``fmt``.

    ``x * 2**frac_bits`` is rounded (floor by default) with exact rational
    arithmetic and then saturated; ±inf saturates, NaN raises.
    """
    _check_mode(rounding)
    try:
        q = _as_rational(x)
    except OverflowError:
        return FixedValue(fmt.max_raw if float(x) > 0 else fmt.min_raw, fmt)
    scaled = q * (1 << fmt.frac_bits)
    if rounding == FLOOR:
        raw = math.floor(scaled)
    else:
        raw = round(scaled)  # Fraction.__round__ is half-to-even
    return FixedValue(fmt.saturate(raw), fmt)


def requantize(a: FixedValue, fmt: FixedFormat, rounding: str = FLOOR) -> FixedValue:
    """Move ``a`` into another format (realign the binary point, then saturate)."""
    _check_mode(rounding)
    raw = round_div_pow2(a.raw, a.format.frac_bits - fmt.frac_bits, rounding)
    return FixedValue(fmt.saturate(raw), fmt)


def _same_frac(a: FixedValue, b: FixedValue, out_fmt: FixedFormat | None = None) -> None:
    if a.format.frac_bits != b.format.frac_bits:
        raise FixedPointError(
            f"operands have different fractional widths: {a.format} vs {b.format}"
        )
    if out_fmt is not None and out_fmt.frac_bits != a.format.frac_bits:
        raise FixedPointError(
            f"output format {out_fmt} does not match operand fraction bits {a.format.frac_bits}"
        )


def fx_add(a: FixedValue, b: FixedValue, out_fmt: FixedFormat) -> FixedValue:
    _same_frac(a, b, out_fmt)
    return FixedValue(out_fmt.saturate(a.raw + b.raw), out_fmt)


def fx_sub(a: FixedValue, b: FixedValue, out_fmt: FixedFormat) -> FixedValue:
    _same_frac(a, b, out_fmt)
    return FixedValue(out_fmt.saturate(a.raw - b.raw), out_fmt)


def fx_mul(a: FixedValue, b: FixedValue, out_fmt: FixedFormat,
           rounding: str = FLOOR) -> FixedValue:
    """Full-precision product, realigned to ``out_fmt.frac_bits`` and saturated."""
    _check_mode(rounding)
    shift = a.format.frac_bits + b.format.frac_bits - out_fmt.frac_bits
    raw = round_div_pow2(a.raw * b.raw, shift, rounding)
    return FixedValue(out_fmt.saturate(raw), out_fmt)


def fx_min(a: FixedValue, b: FixedValue) -> FixedValue:
    if a.format != b.format:
        raise FixedPointError(f"fx_min needs identical formats: {a.format} vs {b.format}")
    return a if a.raw <= b.raw else b


def fx_max(a: FixedValue, b: FixedValue) -> FixedValue:
    if a.format != b.format:
        raise FixedPointError(f"fx_max needs identical formats: {a.format} vs {b.format}")
    return a if a.raw >= b.raw else b


def int_to_f32(raw: int, exp: int = 0) -> np.float32:
    """Nearest float32 to ``raw * 2**exp`` (round half to even).

    Done on the integer directly: converting through a Python float first
    would round twice for codes wider than 53 bits.
    """
    if raw == 0:
        return np.float32(0.0)
    mag = abs(raw)
    drop = mag.bit_length() - 24
    if drop > 0:
        q = mag >> drop
        rem = mag - (q << drop)
        half = 1 << (drop - 1)
        if rem > half or (rem == half and q & 1):
            q += 1
        mag, exp = q, exp + drop
    # mag <= 2**24 fits a float32 significand; scaling by 2**exp is exact here
    out = np.float32(math.ldexp(mag, exp))
    return -out if raw < 0 else out


def fx_to_f32(a: FixedValue) -> np.float32:
    return int_to_f32(a.raw, -a.format.frac_bits)


def f32_to_fx(v, fmt: FixedFormat, rounding: str = FLOOR) -> FixedValue:
    """Float32 back to fixed point; identical to :func:`quantize` on the float value."""
    v = np.float32(v)
    if np.isnan(v):
        raise FixedPointError("NaN cannot be converted to fixed point")
    if np.isinf(v):
        return FixedValue(fmt.max_raw if v > 0 else fmt.min_raw, fmt)
    return quantize(float(v), fmt, rounding)


def dyadic(x: float) -> tuple[int, int]:
    """Exact ``(numerator, shift)`` with ``x == numerator / 2**shift`` for a finite float."""
    num, den = float(x).as_integer_ratio()
    shift = den.bit_length() - 1
    if shift == 0 and num:
        # large integers: pull out powers of two so |num| < 2**53 (shift goes negative)
        tz = (num & -num).bit_length() - 1
        num, shift = num >> tz, -tz
    return num, shift
