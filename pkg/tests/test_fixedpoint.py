from fractions import Fraction
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fuzzypi.fixedpoint import (
    FLOOR,
    HALF_EVEN,
    FixedFormat,
    FixedPointError,
    FixedValue,
    dyadic,
    f32_to_fx,
    fx_add,
    fx_min,
    fx_mul,
    fx_sub,
    fx_to_f32,
    int_to_f32,
    quantize,
    requantize,
    signed,
    unsigned,
)

import oracles


def fv(x, fmt):
    return quantize(x, FixedFormat.parse(fmt) if isinstance(fmt, str) else fmt)


@st.composite
def formats(draw, max_total=24):
    sgn = draw(st.booleans())
    total = draw(st.integers(2 if sgn else 1, max_total))
    frac = draw(st.integers(0, total - (1 if sgn else 0)))
    return FixedFormat(total, frac, sgn)


@st.composite
def values(draw, fmt=None):
    fmt = fmt or draw(formats())
    return FixedValue(draw(st.integers(fmt.min_raw, fmt.max_raw)), fmt)


# -- formats ----------------------------------------------------------------

def test_parse_and_str_round_trip():
    for text in ("s9.8", "u8.8", "s17.8", "u1.0"):
        assert str(FixedFormat.parse(text)) == text


def test_int_bits():
    assert signed(9, 8).int_bits == 0
    assert unsigned(8, 8).int_bits == 0
    assert signed(12, 4).int_bits == 7


@pytest.mark.parametrize("args", [(0, 0, True), (65, 0, True), (8, 8, True), (8, 9, False)])
def test_invalid_formats(args):
    with pytest.raises(FixedPointError):
        FixedFormat(*args)


def test_bad_format_string():
    with pytest.raises(FixedPointError):
        FixedFormat.parse("q9.8")


def test_value_must_fit():
    with pytest.raises(FixedPointError):
        FixedValue(256, unsigned(8, 8))


# -- quantize ---------------------------------------------------------------

def test_quantize_zero():
    for fmt in ("s9.8", "u8.8", "s4.0"):
        assert fv(0.0, fmt).raw == 0


def test_quantize_one_saturates_unsigned():
    assert fv(1.0, "u8.8").raw == 255


def test_quantize_negative_floor():
    assert fv(-0.3, "s9.8").raw == -77
    assert oracles.to_code(Fraction(-0.3), 9, 8, True) == -77


def test_quantize_half_even():
    f = signed(9, 2)
    assert quantize(0.125, f, HALF_EVEN).raw == 0
    assert quantize(0.375, f, HALF_EVEN).raw == 2
    assert quantize(-0.375, f, HALF_EVEN).raw == -2


def test_quantize_inf_and_nan():
    f = signed(9, 8)
    assert quantize(math.inf, f).raw == f.max_raw
    assert quantize(-math.inf, f).raw == f.min_raw
    with pytest.raises(FixedPointError):
        quantize(math.nan, f)


def test_quantize_accepts_strings_and_fractions():
    f = signed(9, 8)
    assert quantize("0.5", f).raw == 128
    assert quantize(Fraction(1, 3), f).raw == 85


@given(formats(), st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_quantize_monotone(fmt, a, b):
    lo, hi = min(a, b), max(a, b)
    assert quantize(lo, fmt).raw <= quantize(hi, fmt).raw


@given(formats(), st.floats(-1e3, 1e3, allow_nan=False), st.sampled_from([FLOOR, HALF_EVEN]))
def test_quantize_matches_rational_oracle(fmt, x, mode):
    ref = oracles.to_code(Fraction(x), fmt.total_bits, fmt.frac_bits, fmt.signed, mode)
    assert quantize(x, fmt, mode).raw == ref


# -- add / sub / mul / min --------------------------------------------------

def test_add_examples():
    u88, s98 = unsigned(8, 8), signed(9, 8)
    assert fx_add(fv(0.25, u88), fv(0.5, u88), unsigned(9, 8)).value == 0.75
    top = FixedValue(s98.max_raw, s98)
    assert fx_add(top, top, s98).raw == s98.max_raw
    assert fx_add(fv(-0.5, s98), fv(0.5, s98), signed(10, 8)).raw == 0


def test_add_rejects_mixed_fraction():
    with pytest.raises(FixedPointError):
        fx_add(fv(0.5, "s9.8"), fv(0.5, "s9.7"), signed(10, 8))
    with pytest.raises(FixedPointError):
        fx_add(fv(0.5, "s9.8"), fv(0.5, "s9.8"), signed(10, 7))


def test_mul_examples():
    u88, s98 = unsigned(8, 8), signed(9, 8)
    x = fv(0.3, s98)
    one = FixedValue(1 << 4, signed(8, 4))
    assert fx_mul(x, one, s98) == x
    assert fx_mul(fv(0.5, u88), fv(0.5, u88), u88).value == 0.25
    p = fx_mul(x, x, s98)
    assert p.raw == (x.raw * x.raw) >> 8


@given(st.data())
def test_add_sub_match_oracle(data):
    fmt = data.draw(formats(16))
    a, b = data.draw(values(fmt)), data.draw(values(fmt))
    extra = data.draw(st.integers(-2, 2))
    total = max(fmt.frac_bits + 1, fmt.total_bits + extra, 2)
    out = FixedFormat(total, fmt.frac_bits, True)
    ra, rb = a.as_fraction(), b.as_fraction()
    assert fx_add(a, b, out).raw == oracles.to_code(ra + rb, out.total_bits, out.frac_bits, True)
    assert fx_sub(a, b, out).raw == oracles.to_code(ra - rb, out.total_bits, out.frac_bits, True)


@given(values(), values(), formats(), st.sampled_from([FLOOR, HALF_EVEN]))
def test_mul_matches_oracle(a, b, out, mode):
    ref = oracles.to_code(a.as_fraction() * b.as_fraction(), out.total_bits, out.frac_bits,
                          out.signed, mode)
    assert fx_mul(a, b, out, mode).raw == ref


def test_min_examples():
    f = unsigned(8, 8)
    a, b, z = fv(0.5, f), fv(0.25, f), fv(0, f)
    assert fx_min(a, b) == b
    assert fx_min(a, a) == a
    assert fx_min(z, a) == z
    with pytest.raises(FixedPointError):
        fx_min(a, fv(0.5, "u9.8"))


@given(st.data())
def test_min_commutative_associative(data):
    fmt = data.draw(formats())
    a, b, c = (data.draw(values(fmt)) for _ in range(3))
    assert fx_min(a, b) == fx_min(b, a)
    assert fx_min(a, fx_min(b, c)) == fx_min(fx_min(a, b), c)


@given(values(), formats(), st.sampled_from([FLOOR, HALF_EVEN]))
def test_requantize_matches_oracle(a, out, mode):
    ref = oracles.to_code(a.as_fraction(), out.total_bits, out.frac_bits, out.signed, mode)
    assert requantize(a, out, mode).raw == ref


# -- float32 boundary -------------------------------------------------------

@given(st.data())
def test_f32_round_trip(data):
    sgn = data.draw(st.booleans())
    total = data.draw(st.integers(2, 24))
    frac = data.draw(st.integers(0, min(23, total - (1 if sgn else 0))))
    fmt = FixedFormat(total, frac, sgn)
    a = data.draw(values(fmt))
    assert f32_to_fx(fx_to_f32(a), fmt) == a


@given(st.integers(-(1 << 62), 1 << 62), st.integers(-40, 10))
def test_int_to_f32_is_nearest(raw, exp):
    got = Fraction(float(int_to_f32(raw, exp)))
    assert got == oracles.nearest_f32(Fraction(raw) * Fraction(2) ** exp)


def test_f32_to_fx_specials():
    f = signed(9, 8)
    assert f32_to_fx(np.float32(np.inf), f).raw == f.max_raw
    assert f32_to_fx(np.float32(-np.inf), f).raw == f.min_raw
    with pytest.raises(FixedPointError):
        f32_to_fx(np.float32(np.nan), f)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_dyadic_exact(x):
    num, shift = dyadic(x)
    assert Fraction(num) / Fraction(2) ** shift == Fraction(x)
    assert abs(num) < 2 ** 53


@settings(max_examples=50)
@given(values(signed(12, 6)), values(signed(12, 6)))
def test_min_picks_smaller_value(a, b):
    assert fx_min(a, b).as_fraction() == min(a.as_fraction(), b.as_fraction())
