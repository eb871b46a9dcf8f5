"""Takagi-Sugeno inference datapath: rule evaluation, defuzzification, executors.

Node formats (N = fractional bits of the normalized signals):

* inputs ``x0, x1`` and output ``v_d``: sV.N, V = N + 1
* membership degrees and rule strengths ``o_g``: uN.N
* rule consequents ``A, B, C``: s(T+1).T
* weighted rule outputs ``a_g``: sH.N, H = N + 3.  ``A*x0`` and ``B*x1`` are
  each floored to N fractional bits, ``C`` is realigned to N fractional bits,
  the three are summed, then ``o_g * (...)`` is floored to N fractional bits.
* numerator ``a``: sP.N, P = H + ceil(log2(G)); denominator ``b``: sQ.N,
  Q = N + ceil(log2(G)) + 1, both from binary adder trees that widen one bit
  per level (wide enough that no node ever saturates).
* ``v_d = a / b`` in IEEE-754 single precision (round to nearest even), then
  floored back into sV.N with saturation.

The numerator and denominator both sum over every rule g = 0..G-1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .fixedpoint import (
    FLOOR,
    FixedFormat,
    FixedValue,
    f32_to_fx,
    fx_add,
    fx_min,
    fx_mul,
    fx_to_f32,
    quantize,
    requantize,
    signed,
)
from .membership import QuantizedBank, degree_format, fuzzify, signal_format


def tree_depth(n: int) -> int:
    return max(0, math.ceil(math.log2(n))) if n > 1 else 0


@dataclass(frozen=True)
class FimFormats:
    n_bits: int
    n_rules: int

    @property
    def depth(self) -> int:
        return tree_depth(self.n_rules)

    @property
    def V(self) -> int:
        return self.n_bits + 1

    @property
    def H(self) -> int:
        return self.n_bits + 3

    @property
    def P(self) -> int:
        return self.H + self.depth

    @property
    def Q(self) -> int:
        return self.n_bits + self.depth + 1

    @property
    def signal(self) -> FixedFormat:
        return signal_format(self.n_bits)

    @property
    def degree(self) -> FixedFormat:
        return degree_format(self.n_bits)

    @property
    def weighted(self) -> FixedFormat:
        return signed(self.H, self.n_bits)

    @property
    def numerator(self) -> FixedFormat:
        return signed(self.P, self.n_bits)

    @property
    def denominator(self) -> FixedFormat:
        return signed(self.Q, self.n_bits)


def consequent_format(t_bits: int) -> FixedFormat:
    return signed(t_bits + 1, t_bits)


@dataclass(frozen=True)
class RuleConsequent:
    A: FixedValue
    B: FixedValue
    C: FixedValue


@dataclass(frozen=True)
class RuleBase:
    """First-order consequents for an F0 x F1 grid, g = F1*l + k.

    Coefficients are stored as exact rationals; ``quantized(T)`` yields the
    s(T+1).T constants the datapath uses.
    """

    sizes: tuple[int, int]
    A: tuple[Fraction, ...]
    B: tuple[Fraction, ...]
    C: tuple[Fraction, ...]

    def __post_init__(self):
        n = self.sizes[0] * self.sizes[1]
        for name in "ABC":
            vals = tuple(Fraction(v) if not isinstance(v, str) else Fraction(v.strip())
                         for v in getattr(self, name))
            if len(vals) != n:
                raise ValueError(f"rule base needs {n} {name} coefficients, got {len(vals)}")
            if any(not -1 < v < 1 for v in vals):
                raise ValueError(f"{name} coefficients must lie in (-1, 1)")
            object.__setattr__(self, name, vals)

    @property
    def n_rules(self) -> int:
        return self.sizes[0] * self.sizes[1]

    def index(self, l: int, k: int) -> int:
        return self.sizes[1] * l + k

    def quantized(self, t_bits: int) -> tuple[RuleConsequent, ...]:
        fmt = consequent_format(t_bits)
        return tuple(RuleConsequent(quantize(a, fmt), quantize(b, fmt), quantize(c, fmt))
                     for a, b, c in zip(self.A, self.B, self.C))

    def rows(self):
        for l in range(self.sizes[0]):
            for k in range(self.sizes[1]):
                g = self.index(l, k)
                yield l, k, self.A[g], self.B[g], self.C[g]

    @classmethod
    def from_rows(cls, sizes: tuple[int, int], rows) -> "RuleBase":
        n = sizes[0] * sizes[1]
        A, B, C = [None] * n, [None] * n, [None] * n
        for l, k, a, b, c in rows:
            l, k = int(l), int(k)
            if not (0 <= l < sizes[0] and 0 <= k < sizes[1]):
                raise ValueError(f"rule ({l}, {k}) outside a {sizes[0]}x{sizes[1]} grid")
            g = sizes[1] * l + k
            if A[g] is not None:
                raise ValueError(f"duplicate rule ({l}, {k})")
            A[g], B[g], C[g] = a, b, c
        if any(v is None for v in A):
            raise ValueError("rule base is missing rows")
        return cls(tuple(sizes), tuple(A), tuple(B), tuple(C))


def additive_rule_base(centers0: Sequence, centers1: Sequence | None = None,
                       limit=Fraction(3, 4)) -> RuleBase:
    """Zero-order PI table ``C = clamp(p_l + p_k, -limit, limit)``, A = B = 0."""
    c0 = [Fraction(c) for c in centers0]
    c1 = c0 if centers1 is None else [Fraction(c) for c in centers1]
    lim = Fraction(limit)
    C = tuple(min(max(a + b, -lim), lim) for a in c0 for b in c1)
    zeros = (Fraction(0),) * len(C)
    return RuleBase((len(c0), len(c1)), zeros, zeros, C)


def default_rule_base() -> RuleBase:
    from .membership import DEFAULT_CENTERS
    return additive_rule_base(DEFAULT_CENTERS)


@dataclass
class FimStatus:
    """Sticky status flags raised by the datapath."""

    div_by_zero: int = 0

    def clear(self) -> None:
        self.div_by_zero = 0


# -- stages -----------------------------------------------------------------

def evaluate_rules(f0: Sequence[FixedValue], f1: Sequence[FixedValue],
                   sizes: tuple[int, int] | None = None) -> list[FixedValue]:
    """o_g = min(f0[l], f1[k]) for g = F1*l + k."""
    if sizes is not None and (len(f0), len(f1)) != tuple(sizes):
        raise ValueError(f"expected {sizes[0]} and {sizes[1]} degrees, got {len(f0)} and {len(f1)}")
    return [fx_min(a, b) for a in f0 for b in f1]


def tree_sum(values: Sequence[FixedValue], fmt: FixedFormat) -> FixedValue:
    """Binary adder tree; each level is one bit wider than the one below."""
    level = list(values)
    if not level:
        return FixedValue(0, fmt)
    cur = fmt
    while len(level) > 1:
        nxt = cur.widened()
        paired = [fx_add(level[i], level[i + 1], nxt) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            paired.append(requantize(level[-1], nxt))
        level, cur = paired, nxt
    return level[0]


def weighted_rule(o: FixedValue, x0: FixedValue, x1: FixedValue, rule: RuleConsequent,
                  fmt: FixedFormat, rounding: str = FLOOR) -> FixedValue:
    """a_g = o_g * (A x0 + B x1 + C) in sH.N."""
    ta = fx_mul(rule.A, x0, fmt, rounding)
    tb = fx_mul(rule.B, x1, fmt, rounding)
    tc = requantize(rule.C, fmt, rounding)
    return fx_mul(o, fx_add(fx_add(ta, tb, fmt), tc, fmt), fmt, rounding)


def numerator(o: Sequence[FixedValue], x0: FixedValue, x1: FixedValue,
              rules: Sequence[RuleConsequent], rounding: str = FLOOR) -> FixedValue:
    fmts = FimFormats(x0.format.frac_bits, len(rules))
    if len(o) != len(rules):
        raise ValueError("one rule strength per consequent required")
    a = [weighted_rule(og, x0, x1, r, fmts.weighted, rounding) for og, r in zip(o, rules)]
    return tree_sum(a, fmts.weighted)


def denominator(o: Sequence[FixedValue]) -> FixedValue:
    n = o[0].format.frac_bits
    fmts = FimFormats(n, len(o))
    return requantize(tree_sum(o, fmts.degree), fmts.denominator)


def defuzzify(a: FixedValue, b: FixedValue, status: FimStatus | None = None,
              rounding: str = FLOOR) -> FixedValue:
    """v_d = a / b through float32; b == 0 yields 0 and raises the status flag."""
    out = signal_format(a.format.frac_bits)
    if b.raw == 0:
        if status is not None:
            status.div_by_zero += 1
        return FixedValue(0, out)
    q = np.float32(fx_to_f32(a) / fx_to_f32(b))
    return f32_to_fx(q, out, rounding)


def fim_one_shot(x0: FixedValue, x1: FixedValue, bank: QuantizedBank,
                 rules: Sequence[RuleConsequent], status: FimStatus | None = None,
                 rounding: str = FLOOR) -> FixedValue:
    f0 = fuzzify(x0, bank, 0, rounding)
    f1 = fuzzify(x1, bank, 1, rounding)
    o = evaluate_rules(f0, f1)
    return defuzzify(numerator(o, x0, x1, rules, rounding), denominator(o), status, rounding)


# -- pipelined executor -----------------------------------------------------

@dataclass(frozen=True)
class PipelineState:
    """Register banks after the input, MFM, OM and OFM stages."""

    x_in: tuple[FixedValue, FixedValue]
    mfm: tuple[tuple[FixedValue, ...], tuple[FixedValue, ...], FixedValue, FixedValue]
    om: tuple[tuple[FixedValue, ...], FixedValue, FixedValue]
    ofm: FixedValue

    @classmethod
    def reset(cls, bank: QuantizedBank) -> "PipelineState":
        n = bank.n_bits
        zx = FixedValue(0, signal_format(n))
        zf = FixedValue(0, degree_format(n))
        f0 = (zf,) * bank.sizes[0]
        f1 = (zf,) * bank.sizes[1]
        o = (zf,) * (bank.sizes[0] * bank.sizes[1])
        return cls((zx, zx), (f0, f1, zx, zx), (o, zx, zx), zx)


PIPELINE_LATENCY = 4


def fim_pipeline_step(state: PipelineState, x0: FixedValue, x1: FixedValue,
                      bank: QuantizedBank, rules: Sequence[RuleConsequent],
                      status: FimStatus | None = None,
                      rounding: str = FLOOR) -> tuple[PipelineState, FixedValue]:
    """Advance one clock; the emitted v_d belongs to the input of 4 steps ago."""
    out = state.ofm
    o, ox0, ox1 = state.om
    ofm = defuzzify(numerator(o, ox0, ox1, rules, rounding), denominator(o), status, rounding)
    f0, f1, mx0, mx1 = state.mfm
    om = (tuple(evaluate_rules(f0, f1)), mx0, mx1)
    ix0, ix1 = state.x_in
    mfm = (tuple(fuzzify(ix0, bank, 0, rounding)), tuple(fuzzify(ix1, bank, 1, rounding)), ix0, ix1)
    return PipelineState((x0, x1), mfm, om, ofm), out
