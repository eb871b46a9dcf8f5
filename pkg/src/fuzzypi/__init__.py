"""Bit-accurate Takagi-Sugeno fuzzy PI controller datapath simulator."""
from .fixedpoint import (
    FLOOR,
    HALF_EVEN,
    FixedFormat,
    FixedPointError,
    FixedValue,
    fx_add,
    fx_max,
    fx_min,
    fx_mul,
    fx_sub,
    quantize,
    requantize,
)
from .membership import MembershipBank, MembershipFunction, default_bank, thirds_bank
from .inference import (
    FimStatus,
    PipelineState,
    RuleBase,
    default_rule_base,
    fim_one_shot,
    fim_pipeline_step,
)

__version__ = "0.1.0"
