"""Fitted synthesis planes (LUT count, throughput) and the dynamic-power ratio.

Plane coefficients are fixed regression constants and are kept verbatim,
including the negligible T terms. The synthesis tables they were fitted to
ship as CSV under ``data/`` for residual checks.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from importlib import resources

ONE_SHOT = "os"
PIPELINE = "p"
VARIANTS = (ONE_SHOT, PIPELINE)
NLUT = "nlut"
RS = "rs_msps"

FIT_N = (8, 16)
FIT_T = (4, 10)
DEFAULT_RULES = 49


class ExtrapolationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PlaneModel:
    variant: str
    quantity: str
    intercept: float
    coef_n: float
    coef_t: float
    r_squared: float

    def __call__(self, n, t) -> float:
        return self.intercept + self.coef_n * n + self.coef_t * t


PLANES = {
    (ONE_SHOT, NLUT): PlaneModel(ONE_SHOT, NLUT, 1682.0, 532.2, 6.493e-13, 0.9766),
    (ONE_SHOT, RS): PlaneModel(ONE_SHOT, RS, 13.24, -0.1163, 3.414e-16, 0.7521),
    (PIPELINE, NLUT): PlaneModel(PIPELINE, NLUT, 1171.0, 491.1, 4.245e-13, 0.9838),
    (PIPELINE, RS): PlaneModel(PIPELINE, RS, 18.48, -0.09704, -5.365e-16, 0.5366),
}


def plane(variant: str, quantity: str) -> PlaneModel:
    try:
        return PLANES[(variant, quantity)]
    except KeyError:
        raise ValueError(f"no plane for variant={variant!r}, quantity={quantity!r}") from None


def estimate(model: PlaneModel, n, t) -> float:
    """Evaluate a plane; warns when (N, T) leaves the fitted range."""
    if not (FIT_N[0] <= n <= FIT_N[1] and FIT_T[0] <= t <= FIT_T[1]):
        warnings.warn(f"(N={n}, T={t}) is outside the fitted range N in {FIT_N}, T in {FIT_T}",
                      ExtrapolationWarning, stacklevel=2)
    return model(n, t)


def mflips(rs_msps: float, n_rules: int = DEFAULT_RULES) -> float:
    """Mega fuzzy inferences per second: rules evaluated per sample times Msps."""
    return n_rules * rs_msps


def estimate_all(variant: str, n, t, n_rules: int = DEFAULT_RULES) -> dict:
    nl = estimate(plane(variant, NLUT), n, t)
    rs = estimate(plane(variant, RS), n, t)
    return {"variant": variant, "n": n, "t": t, "nlut": nl, "rs_msps": rs,
            "mflips": mflips(rs, n_rules)}


def dynamic_power_saving(n_ref_gates, f_ref_mhz, n_work_gates, f_work_mhz) -> float:
    """Ratio of dynamic power, taking P ~ gates * f_clk**3."""
    vals = (n_ref_gates, f_ref_mhz, n_work_gates, f_work_mhz)
    if any(not v > 0 for v in vals):
        raise ValueError("gate counts and clock frequencies must be positive")
    return (n_ref_gates * f_ref_mhz ** 3) / (n_work_gates * f_work_mhz ** 3)


@dataclass(frozen=True)
class SynthesisRow:
    n: int
    t: int
    nr: int
    nlut: int
    nmult: int
    t_s_ns: float
    rs_msps: float


_TABLES = {
    ("fim", ONE_SHOT): "synthesis_os.csv",
    ("fim", PIPELINE): "synthesis_p.csv",
    ("controller", ONE_SHOT): "controller_os.csv",
    ("controller", PIPELINE): "controller_p.csv",
}


def synthesis_table(variant: str, design: str = "fim") -> list[SynthesisRow]:
    """Published synthesis results: ``design`` is "fim" (inference module) or "controller"."""
    try:
        name = _TABLES[(design, variant)]
    except KeyError:
        raise ValueError(f"no table for design={design!r}, variant={variant!r}") from None
    text = resources.files("fuzzypi.data").joinpath(name).read_text()
    rows = []
    for r in csv.DictReader(text.splitlines()):
        rows.append(SynthesisRow(int(r["N"]), int(r["T"]), int(r["NR"]), int(r["NLUT"]),
                                 int(r["NMULT"]), float(r["t_s_ns"]), float(r["rs_msps"])))
    return rows


def residuals(variant: str, quantity: str) -> list[tuple[int, int, float, float, float]]:
    """(N, T, table value, plane value, relative residual) over the fitted table."""
    model = plane(variant, quantity)
    out = []
    for row in synthesis_table(variant):
        obs = float(getattr(row, quantity))
        est = model(row.n, row.t)
        out.append((row.n, row.t, obs, est, (est - obs) / obs))
    return out
