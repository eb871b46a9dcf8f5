"""Double-precision reference inference and the fixed-vs-reference MSE harness.

The reference evaluates the weighted-average inference with the real (never
quantized) breakpoints and consequents, the min t-norm and float64
arithmetic throughout. It knows nothing about N or T.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels as K
from .engine import FimEngine, _KIND_CODE
from .fixedpoint import FLOOR
from .inference import RuleBase, default_rule_base
from .membership import LUT, MembershipBank, default_bank


class ReferenceFim:
    """Packed float64 tables for one bank/rule base pair."""

    def __init__(self, bank: MembershipBank, rules: RuleBase):
        if len(bank.sizes) != 2 or tuple(bank.sizes) != tuple(rules.sizes):
            raise ValueError(f"bank sizes {bank.sizes} do not match rule grid {rules.sizes}")
        fmax = max(bank.sizes)
        self.kinds = np.zeros((2, fmax), dtype=np.int64)
        self.fpars = np.zeros((2, fmax, 5), dtype=np.float64)
        self.counts = np.array(bank.sizes, dtype=np.int64)
        for i, fs in enumerate(bank.inputs):
            for j, fn in enumerate(fs):
                if fn.kind == LUT:
                    raise ValueError("the float reference has no lookup-table membership functions")
                self.kinds[i, j] = _KIND_CODE[fn.kind]
                for slot, v in enumerate((fn.c, fn.d, fn.e, fn.f, fn.m)):
                    self.fpars[i, j, slot] = 0.0 if v is None else float(v)
        self.fA = np.array([float(v) for v in rules.A])
        self.fB = np.array([float(v) for v in rules.B])
        self.fC = np.array([float(v) for v in rules.C])

    @property
    def kernel_args(self):
        return (self.kinds, self.fpars, self.counts, self.fA, self.fB, self.fC)

    def __call__(self, x0, x1) -> tuple[np.ndarray, np.ndarray]:
        a = np.ascontiguousarray(x0, dtype=np.float64).ravel()
        b = np.ascontiguousarray(x1, dtype=np.float64).ravel()
        if a.shape != b.shape:
            raise ValueError("input arrays differ in length")
        out = np.empty_like(a)
        flags = np.empty(a.shape, dtype=np.int8)
        K.fim_float_batch(a, b, *self.kernel_args, out, flags)
        return out, flags


def fim_reference(x0: float, x1: float, bank: MembershipBank | None = None,
                  rules: RuleBase | None = None) -> float:
    """Scalar reference output; an all-zero denominator gives 0."""
    ref = ReferenceFim(bank or default_bank(), rules or default_rule_base())
    v, _ = ref([x0], [x1])
    return float(v[0])


def grid_axis(size: int = 100) -> np.ndarray:
    """Evenly spaced values over [-1, 1] including both endpoints."""
    return np.linspace(-1.0, 1.0, size)


def grid_points(size: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Flattened size x size grid; x0 varies slowest."""
    g = grid_axis(size)
    X0, X1 = np.meshgrid(g, g, indexing="ij")
    return X0.ravel(), X1.ravel()


@dataclass(frozen=True)
class MseReport:
    n_bits: int
    t_bits: int
    grid_points: int
    mse: float
    max_abs_err: float

    def __post_init__(self):
        if self.mse < 0:
            raise ValueError("mse must be non-negative")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Surface:
    """Both engines evaluated over the same grid."""

    n_bits: int
    t_bits: int
    x0: np.ndarray
    x1: np.ndarray
    fixed: np.ndarray  # real value of the sV.N output
    reference: np.ndarray
    fixed_raw: np.ndarray
    div_by_zero: int

    @property
    def error(self) -> np.ndarray:
        return self.reference - self.fixed

    def report(self) -> MseReport:
        err = self.error
        return MseReport(self.n_bits, self.t_bits, int(err.size), float(np.mean(err ** 2)),
                         float(np.max(np.abs(err))))


def evaluate_surface(n_bits: int, t_bits: int, bank: MembershipBank | None = None,
                     rules: RuleBase | None = None, rounding: str = FLOOR,
                     grid_size: int = 100, reference: np.ndarray | None = None) -> Surface:
    """Fixed-point engine on the quantized grid next to the reference on the exact grid.

    The reference sees the real grid coordinates; the fixed-point engine sees
    them after quantization into sV.N, so input quantization counts as error.
    """
    bank = bank or default_bank()
    rules = rules or default_rule_base()
    x0, x1 = grid_points(grid_size)
    eng = FimEngine(bank, rules, n_bits, t_bits, rounding)
    raw, flags = eng.one_shot(eng.quantize(x0), eng.quantize(x1))
    if reference is None:
        reference, _ = ReferenceFim(bank, rules)(x0, x1)
    return Surface(n_bits, t_bits, x0, x1, eng.to_real(raw), reference, raw, int(flags.sum()))


def mse_sweep(n_list=(8, 10, 12, 14, 16), t_list=(4, 6, 8, 10),
              bank: MembershipBank | None = None, rules: RuleBase | None = None,
              rounding: str = FLOOR, grid_size: int = 100) -> list[MseReport]:
    bank = bank or default_bank()
    rules = rules or default_rule_base()
    x0, x1 = grid_points(grid_size)
    ref, _ = ReferenceFim(bank, rules)(x0, x1)
    return [
        evaluate_surface(n, t, bank, rules, rounding, grid_size, ref).report()
        for n in n_list for t in t_list
    ]


def error_constants(reports) -> dict[tuple[int, int], float]:
    """max_abs_err * 2**N per configuration (roughly constant when error ~ 1 LSB)."""
    return {(r.n_bits, r.t_bits): r.max_abs_err * 2.0 ** r.n_bits for r in reports}
