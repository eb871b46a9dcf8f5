import warnings

import pytest
from hypothesis import given, strategies as st

from fuzzypi.costmodel import (
    NLUT,
    ONE_SHOT,
    PIPELINE,
    PLANES,
    RS,
    ExtrapolationWarning,
    dynamic_power_saving,
    estimate,
    estimate_all,
    mflips,
    plane,
    residuals,
    synthesis_table,
)


def test_plane_examples():
    assert estimate(plane(ONE_SHOT, NLUT), 8, 4) == pytest.approx(5939.6, abs=0.05)
    assert estimate(plane(PIPELINE, RS), 8, 4) == pytest.approx(17.70, abs=0.005)
    assert estimate(plane(ONE_SHOT, RS), 16, 4) == pytest.approx(11.38, abs=0.005)


def test_table_rows_next_to_planes():
    os_rows = {(r.n, r.t): r for r in synthesis_table(ONE_SHOT)}
    p_rows = {(r.n, r.t): r for r in synthesis_table(PIPELINE)}
    assert os_rows[8, 4].nlut == 6339
    assert p_rows[8, 4].rs_msps == 17.62
    rel = (estimate(plane(ONE_SHOT, NLUT), 8, 4) - 6339) / 6339
    assert rel == pytest.approx(-0.063, abs=0.001)


@pytest.mark.parametrize("variant", [ONE_SHOT, PIPELINE])
def test_tables_cover_the_fit_grid(variant):
    rows = synthesis_table(variant)
    assert sorted((r.n, r.t) for r in rows) == [(n, t) for n in (8, 10, 12, 14, 16)
                                                 for t in (4, 6, 8, 10)]
    assert all(r.nmult == 49 and r.nlut > 0 and r.rs_msps > 0 for r in rows)
    # throughput is the reciprocal of the sample period; the tabulated N=16, T=4
    # one-shot row is off by 0.03 and is kept as printed
    assert all(abs(r.rs_msps - 1000 / r.t_s_ns) < 0.05 for r in rows)


@pytest.mark.parametrize("variant", [ONE_SHOT, PIPELINE])
def test_controller_tables(variant):
    rows = synthesis_table(variant, "controller")
    assert [(r.n, r.t) for r in rows] == [(n, 10) for n in (8, 10, 12, 14, 16)]
    fim = {(r.n, r.t): r for r in synthesis_table(variant)}
    # the full controller never needs fewer LUTs than its inference module
    assert all(r.nlut >= fim[r.n, r.t].nlut for r in rows)


def test_unknown_table_or_plane():
    with pytest.raises(ValueError):
        synthesis_table("x")
    with pytest.raises(ValueError):
        plane(ONE_SHOT, "power")


@pytest.mark.parametrize("key", sorted(PLANES))
@given(st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50), st.integers(-50, 50))
def test_planes_are_affine(key, n1, t1, n2, t2):
    m = PLANES[key]
    lhs = m(n1, t1) + m(n2, t2)
    rhs = m(n1 + n2, t1 + t2) + m.intercept
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


def test_extrapolation_warning():
    with pytest.warns(ExtrapolationWarning):
        estimate(plane(ONE_SHOT, NLUT), 20, 4)
    with pytest.warns(ExtrapolationWarning):
        estimate(plane(ONE_SHOT, NLUT), 8, 2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        estimate(plane(ONE_SHOT, NLUT), 16, 10)


def test_mflips_and_estimate_all():
    assert mflips(10.0) == 490.0
    out = estimate_all(PIPELINE, 12, 6)
    assert out["mflips"] == pytest.approx(49 * out["rs_msps"])
    assert set(out) == {"variant", "n", "t", "nlut", "rs_msps", "mflips"}


def test_power_saving_examples():
    assert dynamic_power_saving(100, 50, 100, 50) == 1.0
    assert dynamic_power_saving(100, 20, 100, 10) == 8.0
    assert round(dynamic_power_saving(451, 66.251, 11779, 6.63), 2) == 38.20


@pytest.mark.parametrize("args", [(0, 1, 1, 1), (1, -1, 1, 1), (1, 1, 1, 0)])
def test_power_saving_rejects_non_positive(args):
    with pytest.raises(ValueError):
        dynamic_power_saving(*args)


def test_residual_rows():
    rows = residuals(ONE_SHOT, NLUT)
    assert len(rows) == 20
    n, t, obs, est, rel = rows[0]
    assert rel == pytest.approx((est - obs) / obs)
