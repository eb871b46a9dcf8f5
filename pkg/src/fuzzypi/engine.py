"""Vectorized front end to the int64 datapath kernels."""
from __future__ import annotations

import numpy as np

from . import _kernels as K
from .fixedpoint import FLOOR, HALF_EVEN, FixedValue
from .inference import RuleBase
from .membership import (
    LEFT_TRAPEZOID,
    LUT,
    RIGHT_TRAPEZOID,
    TRIANGLE,
    MembershipBank,
    signal_format,
)

_KIND_CODE = {RIGHT_TRAPEZOID: K.RT, LEFT_TRAPEZOID: K.LT, TRIANGLE: K.TRI, LUT: K.LUTK}
_MODE_CODE = {FLOOR: 0, HALF_EVEN: 1}


def rounding_code(rounding: str) -> int:
    try:
        return _MODE_CODE[rounding]
    except KeyError:
        raise ValueError(f"unknown rounding mode {rounding!r}") from None


def check_widths(n_bits: int, t_bits: int) -> None:
    """Reject configurations whose products would not fit int64."""
    f = max(n_bits, t_bits)
    if not 2 <= n_bits <= 28:
        raise ValueError(f"engine supports 2 <= N <= 28, got N={n_bits}")
    if not 1 <= t_bits <= 28:
        raise ValueError(f"engine supports 1 <= T <= 28, got T={t_bits}")
    # membership ramp: (F+3)-bit difference times a (2T+1)-bit slope
    if f + 2 * t_bits + 4 > 62:
        raise ValueError(f"N={n_bits}, T={t_bits} exceeds the int64 engine")


class FimEngine:
    """Packed constants for one (bank, rules, N, T, rounding) configuration."""

    def __init__(self, bank: MembershipBank, rules: RuleBase, n_bits: int, t_bits: int,
                 rounding: str = FLOOR):
        if len(bank.sizes) != 2 or tuple(bank.sizes) != tuple(rules.sizes):
            raise ValueError(f"bank sizes {bank.sizes} do not match rule grid {rules.sizes}")
        check_widths(n_bits, t_bits)
        self.bank, self.rules = bank, rules
        self.n_bits, self.t_bits = n_bits, t_bits
        self.rounding = rounding
        self.mode = rounding_code(rounding)
        qb = bank.quantized(n_bits, t_bits)
        fmax = max(bank.sizes)
        has_lut = any(s.kind == LUT for fs in qb.specs for s in fs)
        lut_len = (1 << (n_bits + 1)) if has_lut else 1
        self.kinds = np.zeros((2, fmax), dtype=np.int64)
        self.pars = np.zeros((2, fmax, 7), dtype=np.int64)
        self.luts = np.zeros((2, fmax, lut_len), dtype=np.int64)
        self.counts = np.array(bank.sizes, dtype=np.int64)
        for i, fs in enumerate(qb.specs):
            for j, s in enumerate(fs):
                self.kinds[i, j] = _KIND_CODE[s.kind]
                if s.kind == LUT:
                    self.luts[i, j, :] = s.lut
                    continue
                for slot, fv in zip(range(7), (s.c, s.d, s.e, s.f, s.m, s.slope_fall, s.slope_rise)):
                    self.pars[i, j, slot] = 0 if fv is None else fv.raw
        q = rules.quantized(t_bits)
        self.rA = np.array([r.A.raw for r in q], dtype=np.int64)
        self.rB = np.array([r.B.raw for r in q], dtype=np.int64)
        self.rC = np.array([r.C.raw for r in q], dtype=np.int64)

    @property
    def kernel_args(self):
        return (self.kinds, self.pars, self.luts, self.counts, self.rA, self.rB, self.rC)

    @property
    def signal(self):
        return signal_format(self.n_bits)

    def quantize(self, x) -> np.ndarray:
        """Reals -> sV.N raw codes (floor or half-even, saturating)."""
        x = np.asarray(x, dtype=np.float64)
        scaled = np.ldexp(x, self.n_bits)
        raw = np.floor(scaled) if self.mode == 0 else np.rint(scaled)
        f = self.signal
        return np.clip(raw, f.min_raw, f.max_raw).astype(np.int64)

    def to_real(self, raw) -> np.ndarray:
        return np.ldexp(np.asarray(raw, dtype=np.float64), -self.n_bits)

    def one_shot(self, x0_raw, x1_raw) -> tuple[np.ndarray, np.ndarray]:
        """v_d raw codes and division-by-zero flags for arrays of input codes."""
        x0 = np.ascontiguousarray(x0_raw, dtype=np.int64).ravel()
        x1 = np.ascontiguousarray(x1_raw, dtype=np.int64).ravel()
        if x0.shape != x1.shape:
            raise ValueError("input arrays differ in length")
        self._check_codes(x0)
        self._check_codes(x1)
        out = np.empty_like(x0)
        flags = np.empty(x0.shape, dtype=np.int8)
        K.one_shot_batch(x0, x1, *self.kernel_args, self.n_bits, self.t_bits, self.mode,
                         out, flags)
        return out, flags

    def one_shot_fx(self, x0: FixedValue, x1: FixedValue) -> FixedValue:
        out, _ = self.one_shot([x0.raw], [x1.raw])
        return FixedValue(int(out[0]), self.signal)

    def pipeline(self, s0, s1) -> tuple[np.ndarray, np.ndarray]:
        """Feed (B, L) input streams through reset pipelines; returns (B, L) outputs."""
        s0 = np.ascontiguousarray(np.atleast_2d(s0), dtype=np.int64)
        s1 = np.ascontiguousarray(np.atleast_2d(s1), dtype=np.int64)
        if s0.shape != s1.shape:
            raise ValueError("stream arrays differ in shape")
        self._check_codes(s0)
        self._check_codes(s1)
        out = np.empty_like(s0)
        flags = np.empty(s0.shape, dtype=np.int8)
        K.pipeline_batch(s0, s1, *self.kernel_args, self.n_bits, self.t_bits, self.mode,
                         out, flags)
        return out, flags

    def _check_codes(self, raw: np.ndarray) -> None:
        f = self.signal
        if raw.size and (raw.min() < f.min_raw or raw.max() > f.max_raw):
            raise ValueError(f"input codes outside {f}")
