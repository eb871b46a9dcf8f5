"""Fuzzy PI loop: input processing (error, difference, gains), inference, integrator.

Signal flow per sample::

    e   = y_sp - y                     quantized into sM.N
    e_d = e - e_prev                   s(M+1).N (exact)
    x0  = sat_sV.N(Kp * e_d)           difference path
    x1  = sat_sV.N(Ki * e)             error path
    v_d = FIM(x0, x1)                  one-shot or 4-stage pipeline
    v   = clamp(v + v_d, v_min, v_max) sG.N accumulator, r = v

Gains are applied as exact products with the float gain's dyadic value, then
rounded (floor by default) and saturated. The accumulator is clamped before
it is stored, so it never holds a value outside [v_min, v_max].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .fixedpoint import (
    FLOOR,
    ROUNDING_MODES,
    FixedFormat,
    FixedValue,
    dyadic,
    fx_sub,
    quantize,
    round_div_pow2,
    signed,
)
from .inference import (
    FimStatus,
    PipelineState,
    RuleBase,
    fim_one_shot,
    fim_pipeline_step,
)
from .membership import MembershipBank, signal_format

ONESHOT = "oneshot"
PIPELINE = "pipeline"
MODES = (ONESHOT, PIPELINE)


def _clog2(x: int) -> int:
    return (x - 1).bit_length() if x > 1 else 0


@dataclass(frozen=True)
class ControllerConfig:
    kp: float = 2000.0
    ki: float = 0.1
    t_s: float = 1e-5
    v_min: float = -3.0
    v_max: float = 3.0
    y_max: float = 1.0
    n_bits: int = 12
    t_bits: int = 10
    mode: str = ONESHOT
    rounding: str = FLOOR

    def __post_init__(self):
        for name in ("kp", "ki", "t_s", "v_min", "v_max", "y_max"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ValueError(f"{name} must be a finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        if not self.kp > 0 or not self.ki > 0:
            raise ValueError("kp and ki must be positive")
        if not self.t_s > 0:
            raise ValueError("t_s must be positive")
        if not self.v_min < self.v_max:
            raise ValueError("v_min must be below v_max")
        if not self.y_max > 0:
            raise ValueError("y_max must be positive")
        if not 4 <= self.n_bits <= 32:
            raise ValueError(f"n_bits must be in [4, 32], got {self.n_bits}")
        if not 2 <= self.t_bits <= 16:
            raise ValueError(f"t_bits must be in [2, 16], got {self.t_bits}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.rounding not in ROUNDING_MODES:
            raise ValueError(f"rounding must be one of {ROUNDING_MODES}, got {self.rounding!r}")
        acc = self.accumulator_format
        if not (acc.min_raw <= self.v_min_raw <= self.v_max_raw <= acc.max_raw):
            raise ValueError(f"[v_min, v_max] = [{self.v_min}, {self.v_max}] does not fit {acc}")

    @property
    def M(self) -> int:
        return self.n_bits + _clog2(math.ceil(self.y_max)) + 1

    @property
    def G(self) -> int:
        return self.n_bits + _clog2(math.ceil(self.v_max - self.v_min)) + 1

    @property
    def error_format(self) -> FixedFormat:
        return signed(self.M, self.n_bits)

    @property
    def difference_format(self) -> FixedFormat:
        return signed(self.M + 1, self.n_bits)

    @property
    def accumulator_format(self) -> FixedFormat:
        return signed(self.G, self.n_bits)

    @property
    def signal_format(self) -> FixedFormat:
        return signal_format(self.n_bits)

    @property
    def v_min_raw(self) -> int:
        # innermost representable bounds, so the clamp never leaves [v_min, v_max]
        return math.ceil(Fraction(self.v_min) * (1 << self.n_bits))

    @property
    def v_max_raw(self) -> int:
        return math.floor(Fraction(self.v_max) * (1 << self.n_bits))

    def replace(self, **kw) -> "ControllerConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return ControllerConfig(**d)


@dataclass
class StepRecord:
    """Everything the step log needs, as real values."""

    n: int
    y: float
    y_sp: float
    e: float
    e_d: float
    x0: float
    x1: float
    v_d: float
    r: float


@dataclass
class ControllerState:
    prev_error: FixedValue
    v: FixedValue
    pipeline: PipelineState | None = None
    status: FimStatus = field(default_factory=FimStatus)
    input_saturations: int = 0
    n: int = 0
    last: StepRecord | None = None
    # e, e_d of the current sample, kept for the step log
    _e: FixedValue | None = None
    _ed: FixedValue | None = None

    @classmethod
    def reset(cls, cfg: ControllerConfig, bank: MembershipBank | None = None) -> "ControllerState":
        pipe = None
        if cfg.mode == PIPELINE:
            if bank is None:
                raise ValueError("pipeline mode needs the membership bank to size its registers")
            pipe = PipelineState.reset(bank.quantized(cfg.n_bits, cfg.t_bits))
        return cls(FixedValue(0, cfg.error_format), FixedValue(0, cfg.accumulator_format), pipe)


def apply_gain(x: FixedValue, gain: float, out: FixedFormat, rounding: str = FLOOR) -> FixedValue:
    """sat_out(gain * x) with the exact dyadic value of ``gain``."""
    num, shift = dyadic(gain)
    raw = round_div_pow2(x.raw * num, shift + x.format.frac_bits - out.frac_bits, rounding)
    return FixedValue(out.saturate(raw), out)


def ipm_step(y: float, y_sp: float, state: ControllerState,
             cfg: ControllerConfig) -> tuple[FixedValue, FixedValue]:
    """Error, error difference and gains; updates ``prev_error``."""
    ym = cfg.y_max
    clipped = False
    if abs(y) > ym:
        y, clipped = math.copysign(ym, y), True
    if abs(y_sp) > ym:
        y_sp, clipped = math.copysign(ym, y_sp), True
    if clipped:
        state.input_saturations += 1
    e = quantize(Fraction(y_sp) - Fraction(y), cfg.error_format, cfg.rounding)
    ed = fx_sub(e, state.prev_error, cfg.difference_format)
    x0 = apply_gain(ed, cfg.kp, cfg.signal_format, cfg.rounding)
    x1 = apply_gain(e, cfg.ki, cfg.signal_format, cfg.rounding)
    state.prev_error = e
    state._e, state._ed = e, ed
    return x0, x1


def im_step(v_d: FixedValue, state: ControllerState, cfg: ControllerConfig) -> FixedValue:
    """v <- clamp(v + v_d, v_min, v_max); returns the new v."""
    if v_d.format.frac_bits != cfg.n_bits:
        raise ValueError(f"v_d must carry {cfg.n_bits} fractional bits")
    raw = min(max(state.v.raw + v_d.raw, cfg.v_min_raw), cfg.v_max_raw)
    state.v = FixedValue(raw, cfg.accumulator_format)
    return state.v


@lru_cache(maxsize=32)
def _quantized_rules(rules: RuleBase, t_bits: int):
    return rules.quantized(t_bits)


def controller_step(y: float, y_sp: float, state: ControllerState, cfg: ControllerConfig,
                    bank: MembershipBank, rules: RuleBase) -> float:
    """One sample of the whole loop; returns the actuator command r."""
    qb = bank.quantized(cfg.n_bits, cfg.t_bits)
    qr = _quantized_rules(rules, cfg.t_bits)
    x0, x1 = ipm_step(y, y_sp, state, cfg)
    if cfg.mode == PIPELINE:
        state.pipeline, v_d = fim_pipeline_step(state.pipeline, x0, x1, qb, qr, state.status,
                                                cfg.rounding)
    else:
        v_d = fim_one_shot(x0, x1, qb, qr, state.status, cfg.rounding)
    r = im_step(v_d, state, cfg)
    state.last = StepRecord(state.n, y, y_sp, state._e.value, state._ed.value, x0.value,
                            x1.value, v_d.value, r.value)
    state.n += 1
    return r.value


class FuzzyPIController:
    """Convenience owner of one control channel (config, tables and state)."""

    def __init__(self, cfg: ControllerConfig, bank: MembershipBank, rules: RuleBase):
        self.cfg, self.bank, self.rules = cfg, bank, rules
        self.state = ControllerState.reset(cfg, bank)

    def reset(self) -> None:
        self.state = ControllerState.reset(self.cfg, self.bank)

    def step(self, y: float, y_sp: float) -> float:
        return controller_step(y, y_sp, self.state, self.cfg, self.bank, self.rules)

    def run(self, ys, y_sps) -> list[StepRecord]:
        out = []
        for y, sp in zip(ys, y_sps):
            self.step(y, sp)
            out.append(self.state.last)
        return out
