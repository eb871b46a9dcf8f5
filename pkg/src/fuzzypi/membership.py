"""Fuzzification: trapezoid/triangle membership functions in fixed point.

Breakpoints are defined as reals (:class:`MembershipFunction`) and quantized
per bit configuration into :class:`MembershipSpec` constants in the sW.T
format with ``W = 2*T + 1``. Ramps are evaluated as ``(d - x) * slope`` with
the reciprocal slope precomputed in sW.T, then saturated into uN.N.

Kind names follow the hardware equations: a *right trapezoid* is 1 left of
``c`` and falls to 0 at ``d``; a *left trapezoid* is 0 left of ``e`` and
rises to 1 at ``f``. So the leftmost label (LN) uses ``RIGHT_TRAPEZOID``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

from .fixedpoint import (
    FLOOR,
    FixedFormat,
    FixedValue,
    fx_mul,
    fx_sub,
    quantize,
    requantize,
    signed,
    unsigned,
)

RIGHT_TRAPEZOID = "right_trapezoid"
LEFT_TRAPEZOID = "left_trapezoid"
TRIANGLE = "triangle"
LUT = "lut"
KINDS = (RIGHT_TRAPEZOID, LEFT_TRAPEZOID, TRIANGLE, LUT)

DEFAULT_LABELS = ("LN", "MN", "SN", "ZZ", "SP", "MP", "LP")


def constant_format(t_bits: int) -> FixedFormat:
    """sW.T with W = 2T + 1."""
    return signed(2 * t_bits + 1, t_bits)


def signal_format(n_bits: int) -> FixedFormat:
    """sV.N with V = N + 1: the normalized (-1, 1) signal format."""
    return signed(n_bits + 1, n_bits)


def degree_format(n_bits: int) -> FixedFormat:
    """uN.N membership degree."""
    return unsigned(n_bits, n_bits)


def _frac(x) -> Fraction | None:
    if x is None:
        return None
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


@dataclass(frozen=True)
class MembershipFunction:
    """Real-valued definition of one membership function."""

    label: str
    kind: str
    c: Fraction | None = None
    d: Fraction | None = None
    e: Fraction | None = None
    f: Fraction | None = None
    m: Fraction | None = None
    table: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        for name in "cdefm":
            object.__setattr__(self, name, _frac(getattr(self, name)))
        k = self.kind
        if k == RIGHT_TRAPEZOID:
            if self.c is None or self.d is None or not self.c < self.d:
                raise ValueError(f"{self.label}: right trapezoid needs c < d")
        elif k == LEFT_TRAPEZOID:
            if self.e is None or self.f is None or not self.e < self.f:
                raise ValueError(f"{self.label}: left trapezoid needs e < f")
        elif k == TRIANGLE:
            if self.m is None:
                raise ValueError(f"{self.label}: triangle needs a center m")
            object.__setattr__(self, "c", self.m)
            object.__setattr__(self, "f", self.m)
            if self.e is None or self.d is None or not self.e < self.m < self.d:
                raise ValueError(f"{self.label}: triangle needs e < m < d")
        elif k == LUT:
            if self.table is None:
                raise ValueError(f"{self.label}: lookup-table function needs a table callable")
            return
        else:
            raise ValueError(f"unknown membership kind {k!r}")
        for name in "cdefm":
            v = getattr(self, name)
            if v is not None and not -1 <= v <= 1:
                raise ValueError(f"{self.label}: breakpoint {name}={v} outside [-1, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "MembershipFunction":
        return cls(label=d["label"], kind=d["kind"],
                   **{k: d[k] for k in "cdefm" if k in d})

    def to_dict(self) -> dict:
        out = {"label": self.label, "kind": self.kind}
        for k in "cdefm":
            v = getattr(self, k)
            if v is not None:
                out[k] = str(v) if v.denominator != 1 else int(v)
        return out


@dataclass(frozen=True)
class MembershipSpec:
    """One membership function quantized for a given (N, T)."""

    label: str
    kind: str
    c: FixedValue | None
    d: FixedValue | None
    e: FixedValue | None
    f: FixedValue | None
    m: FixedValue | None
    slope_fall: FixedValue | None  # 1/(d - c), sW.T
    slope_rise: FixedValue | None  # 1/(f - e), sW.T
    lut: tuple[int, ...] | None = None  # uN.N codes indexed by x.raw - x.min_raw


def quantize_function(fn: MembershipFunction, n_bits: int, t_bits: int) -> MembershipSpec:
    fmt = constant_format(t_bits)
    q = lambda v: None if v is None else quantize(v, fmt)
    if fn.kind == LUT:
        xf = signal_format(n_bits)
        out = degree_format(n_bits)
        lut = tuple(
            quantize(min(max(fn.table(raw * xf.lsb), 0.0), 1.0), out).raw
            for raw in range(xf.min_raw, xf.max_raw + 1)
        )
        return MembershipSpec(fn.label, LUT, None, None, None, None, None, None, None, lut)
    fall = rise = None
    if fn.kind in (RIGHT_TRAPEZOID, TRIANGLE):
        fall = quantize(1 / (fn.d - fn.c), fmt)
    if fn.kind in (LEFT_TRAPEZOID, TRIANGLE):
        rise = quantize(1 / (fn.f - fn.e), fmt)
    return MembershipSpec(fn.label, fn.kind, q(fn.c), q(fn.d), q(fn.e), q(fn.f), q(fn.m),
                          fall, rise)


@dataclass(frozen=True)
class QuantizedBank:
    n_bits: int
    t_bits: int
    specs: tuple[tuple[MembershipSpec, ...], ...]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.specs)


@dataclass(frozen=True)
class MembershipBank:
    """Per-input ordered membership functions (real definitions)."""

    inputs: tuple[tuple[MembershipFunction, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(tuple(fs) for fs in self.inputs))
        if not self.inputs or any(len(fs) == 0 for fs in self.inputs):
            raise ValueError("every input needs at least one membership function")

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(fs) for fs in self.inputs)

    def labels(self, input_index: int) -> tuple[str, ...]:
        return tuple(fn.label for fn in self.inputs[input_index])

    def quantized(self, n_bits: int, t_bits: int) -> QuantizedBank:
        return _quantize_bank(self, n_bits, t_bits)

    @classmethod
    def from_dict(cls, d: dict) -> "MembershipBank":
        return cls(tuple(tuple(MembershipFunction.from_dict(f) for f in fs)
                         for fs in d["inputs"]))

    def to_dict(self) -> dict:
        return {"inputs": [[fn.to_dict() for fn in fs] for fs in self.inputs]}


@lru_cache(maxsize=64)
def _quantize_bank(bank: MembershipBank, n_bits: int, t_bits: int) -> QuantizedBank:
    return QuantizedBank(n_bits, t_bits, tuple(
        tuple(quantize_function(fn, n_bits, t_bits) for fn in fs) for fs in bank.inputs))


def shoulder_bank(centers: Sequence, labels: Sequence[str] = DEFAULT_LABELS,
                  n_inputs: int = 2) -> MembershipBank:
    """Shoulders at both ends, triangles in between, feet on neighbouring centers.

    The first function is flat (1) left of ``centers[0]``, the last is flat
    right of ``centers[-1]``; adjacent functions cross at 0.5.
    """
    cs = [_frac(c) for c in centers]
    if len(cs) < 2 or len(labels) != len(cs):
        raise ValueError("need at least two centers and one label per center")
    fns = [MembershipFunction(labels[0], RIGHT_TRAPEZOID, c=cs[0], d=cs[1])]
    for j in range(1, len(cs) - 1):
        fns.append(MembershipFunction(labels[j], TRIANGLE, e=cs[j - 1], m=cs[j], d=cs[j + 1]))
    fns.append(MembershipFunction(labels[-1], LEFT_TRAPEZOID, e=cs[-2], f=cs[-1]))
    return MembershipBank(tuple(tuple(fns) for _ in range(n_inputs)))


DEFAULT_CENTERS = tuple(Fraction(k, 4) for k in range(-3, 4))
THIRDS_CENTERS = tuple(Fraction(k, 3) for k in range(-3, 4))


def default_bank() -> MembershipBank:
    """Seven-label uniform partition with centers at k/4, k = -3..3.

    Shoulders plateau beyond +-3/4. Every breakpoint and reciprocal slope (4)
    is exact in sW.T for T >= 3, so fuzzification does not depend on T.
    """
    return shoulder_bank(DEFAULT_CENTERS)


def thirds_bank() -> MembershipBank:
    """Uniform partition with centers at k/3 (not exactly representable in sW.T)."""
    return shoulder_bank(THIRDS_CENTERS)


# -- fixed-point evaluation -------------------------------------------------

def _aligned(a: FixedValue, frac: int) -> FixedValue:
    # exact: only ever widens the fraction
    extra = frac - a.format.frac_bits
    return requantize(a, signed(a.format.total_bits + extra, frac))


def _ramp(hi: FixedValue, lo: FixedValue, slope: FixedValue, n_bits: int,
          rounding: str = FLOOR) -> FixedValue:
    """(hi - lo) * slope saturated into uN.N; hi, lo already aligned."""
    width = max(hi.format.total_bits, lo.format.total_bits) + 1
    diff = fx_sub(hi, lo, signed(width, hi.format.frac_bits))
    return fx_mul(diff, slope, degree_format(n_bits), rounding)


def _align_pair(x: FixedValue, consts: Sequence[FixedValue]):
    frac = max(x.format.frac_bits, consts[0].format.frac_bits)
    return _aligned(x, frac), [_aligned(c, frac) for c in consts]


def mu_right_trapezoid(x: FixedValue, spec: MembershipSpec, rounding: str = FLOOR) -> FixedValue:
    n = x.format.frac_bits
    out = degree_format(n)
    xa, (c, d) = _align_pair(x, (spec.c, spec.d))
    if xa.raw > d.raw:
        return FixedValue(0, out)
    if xa.raw < c.raw:
        return FixedValue(out.max_raw, out)
    return _ramp(d, xa, spec.slope_fall, n, rounding)


def mu_left_trapezoid(x: FixedValue, spec: MembershipSpec, rounding: str = FLOOR) -> FixedValue:
    n = x.format.frac_bits
    out = degree_format(n)
    xa, (e, f) = _align_pair(x, (spec.e, spec.f))
    if xa.raw < e.raw:
        return FixedValue(0, out)
    if xa.raw > f.raw:
        return FixedValue(out.max_raw, out)
    return _ramp(xa, e, spec.slope_rise, n, rounding)


def mu_triangle(x: FixedValue, spec: MembershipSpec, rounding: str = FLOOR) -> FixedValue:
    xa, (m,) = _align_pair(x, (spec.m,))
    if xa.raw < m.raw:
        return mu_left_trapezoid(x, spec, rounding)
    return mu_right_trapezoid(x, spec, rounding)


def mu_lut(x: FixedValue, spec: MembershipSpec, rounding: str = FLOOR) -> FixedValue:
    out = degree_format(x.format.frac_bits)
    return FixedValue(spec.lut[x.raw - x.format.min_raw], out)


_EVAL = {
    RIGHT_TRAPEZOID: mu_right_trapezoid,
    LEFT_TRAPEZOID: mu_left_trapezoid,
    TRIANGLE: mu_triangle,
    LUT: mu_lut,
}


def membership(x: FixedValue, spec: MembershipSpec, rounding: str = FLOOR) -> FixedValue:
    return _EVAL[spec.kind](x, spec, rounding)


def fuzzify(x: FixedValue, bank: QuantizedBank, input_index: int,
            rounding: str = FLOOR) -> list[FixedValue]:
    """All membership degrees of input ``input_index``, in bank order."""
    if not 0 <= input_index < len(bank.specs):
        raise IndexError(f"input index {input_index} out of range")
    if x.format != signal_format(bank.n_bits):
        raise ValueError(f"input must be {signal_format(bank.n_bits)}, got {x.format}")
    return [membership(x, s, rounding) for s in bank.specs[input_index]]
