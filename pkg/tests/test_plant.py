import numpy as np
import pytest

from fuzzypi.controller import PIPELINE, ControllerConfig
from fuzzypi.plant import (
    FLOAT,
    PlantParams,
    PlantState,
    SimulationDiverged,
    SimulationResult,
    TrajectorySchedule,
    dynamics,
    energy,
    forward_kinematics,
    gravity_torque,
    inertia_matrix,
    rk4_step,
    settling_summary,
    simulate_closed_loop,
    simulate_open_loop,
    trajectory_difference,
)

FRICTIONLESS = PlantParams(b=(0.0, 0.0, 0.0))


def test_default_parameters():
    p = PlantParams()
    assert (p.L1, p.L2, p.L3) == (0.135, 0.135, 0.025)
    assert p.L4 == pytest.approx(0.17)


@pytest.mark.parametrize("kw", [dict(L1=0), dict(m2=-1), dict(J=(1, 1)), dict(b=(-1, 0, 0)),
                                dict(J=(0, 1, 1))])
def test_invalid_parameters(kw):
    with pytest.raises(ValueError):
        PlantParams(**kw)


def test_inertia_matrix_symmetric_positive():
    rng = np.random.default_rng(0)
    for _ in range(20):
        m = inertia_matrix(rng.uniform(-np.pi, np.pi, 3), PlantParams())
        assert np.allclose(m, m.T)
        assert np.all(np.linalg.eigvalsh(m) > 0)


def test_gravity_compensation():
    p = PlantParams()
    for th in ([0.3, 0.8, -0.4], [0, 0, 0], [1.0, -1.2, 2.0]):
        s = PlantState(th, [0, 0, 0])
        assert np.allclose(dynamics(s, gravity_torque(th, p), p), 0, atol=1e-12)


def test_zero_case():
    p = PlantParams(g=0.0, b=(0.0, 0.0, 0.0))
    s = PlantState([0.4, -0.3, 1.1], [0, 0, 0])
    assert np.array_equal(dynamics(s, [0, 0, 0], p), np.zeros(3))


def test_gravity_pulls_arm_down():
    p = PlantParams()
    acc = dynamics(PlantState([0, 0, 0], [0, 0, 0]), [0, 0, 0], p)
    assert acc[0] == 0 and acc[1] < 0


def test_energy_conserved_without_friction():
    s0 = PlantState([0.2, 0.5, -0.7], [1.5, -2.0, 3.0])
    s1, e = simulate_open_loop(s0, [0, 0, 0], FRICTIONLESS, 1e-3, 10_000)
    assert abs(e[-1] - e[0]) / abs(e[0]) < 1e-3
    assert np.max(np.abs(e - e[0])) / abs(e[0]) < 1e-3
    assert e[0] == pytest.approx(energy(s0, FRICTIONLESS))


def test_friction_dissipates():
    s0 = PlantState([0.2, 0.5, -0.7], [1.5, -2.0, 3.0])
    _, e = simulate_open_loop(s0, [0, 0, 0], PlantParams(), 1e-3, 2000)
    assert e[-1] < e[0]


def test_rk4_step_matches_run():
    s0 = PlantState([0.1, 0.2, 0.3], [0.0, 0.5, -0.5])
    s = s0
    for _ in range(10):
        s = rk4_step(s, [0.01, 0.02, 0.0], PlantParams(), 1e-3)
    s2, _ = simulate_open_loop(s0, [0.01, 0.02, 0.0], PlantParams(), 1e-3, 10)
    assert np.array_equal(s.theta, s2.theta) and np.array_equal(s.dtheta, s2.dtheta)


def test_non_finite_state_raises():
    with pytest.raises(SimulationDiverged):
        dynamics(PlantState([np.nan, 0, 0], [0, 0, 0]), [0, 0, 0], PlantParams())


def test_forward_kinematics_home():
    p = PlantParams()
    assert np.allclose(forward_kinematics([0, 0, 0], p), [p.L1 + p.L2 + p.L3, 0, p.L4])


def test_default_schedule():
    s = TrajectorySchedule.default()
    assert s.durations == (2.0,) * 5 and s.total == 10.0
    assert [r[0] for r in s.setpoints_deg] == [90, 0, 45, -45, 90]
    assert [r[1] for r in s.setpoints_deg] == [45, 45, 0, 22.5, 45]
    assert [r[2] for r in s.setpoints_deg] == [45, 22.5, 0, 22.5, 45]
    assert s.starts == (0.0, 2.0, 4.0, 6.0, 8.0)
    assert s.setpoint(3.0) == (0.0, 45.0, 22.5)
    assert s.joint_range(0) == 135.0
    assert TrajectorySchedule.from_dict(s.to_dict()) == s


def test_invalid_schedule():
    with pytest.raises(ValueError):
        TrajectorySchedule((1.0,), ((0, 0, 0), (1, 1, 1)))
    with pytest.raises(ValueError):
        TrajectorySchedule((0.0,), ((0, 0, 0),))


HOLD = TrajectorySchedule((0.1,), ((0.0, 0.0, 0.0),))
STEP = TrajectorySchedule((0.1, 0.1), ((20.0, 10.0, -10.0), (-5.0, 15.0, 5.0)))


def test_hold_at_zero_stays_close():
    res = simulate_closed_loop(ControllerConfig(n_bits=12), HOLD)
    assert np.max(np.abs(res.theta_deg)) < 1.0
    assert res.steps == 10_000 and res.duration == pytest.approx(0.1)


@pytest.mark.parametrize("mode", ["oneshot", PIPELINE])
def test_torque_bound_and_determinism(mode):
    cfg = ControllerConfig(n_bits=12, v_min=-0.4, v_max=0.25, mode=mode)
    a = simulate_closed_loop(cfg, STEP, log_every=10)
    b = simulate_closed_loop(cfg, STEP, log_every=10)
    assert np.all(a.tau >= -0.4) and np.all(a.tau <= 0.25)
    assert np.array_equal(a.theta_deg, b.theta_deg) and np.array_equal(a.tau, b.tau)
    assert a.t.shape[0] == 2000
    # reset pipeline registers hold all-zero degrees: two b == 0 clocks per joint
    assert a.div_by_zero == (6 if mode == PIPELINE else 0)


def test_float_controller_tracks_the_fixed_one():
    cfg = ControllerConfig(n_bits=16)
    a = simulate_closed_loop(cfg, STEP)
    b = simulate_closed_loop(cfg, STEP, controller=FLOAT)
    assert trajectory_difference(a, b, STEP) < 1.0


def test_divergence_is_reported():
    # friction over inertia times the step is far outside RK4's stability region
    stiff = PlantParams(m2=1e-6, m3=1e-6, J=(1e-6, 1e-6, 1e-6))
    with pytest.raises(SimulationDiverged):
        simulate_closed_loop(ControllerConfig(n_bits=12), STEP, stiff, t_s=1e-3)


def test_mismatched_controllers_rejected():
    with pytest.raises(ValueError):
        simulate_closed_loop([ControllerConfig(n_bits=12)] * 2 + [ControllerConfig(n_bits=14)], HOLD)


def synthetic(theta, t_s=0.01):
    n = theta.shape[0]
    t = np.arange(n) * t_s
    return SimulationResult(t, theta, np.zeros_like(theta), np.zeros_like(theta), "fixed", 12,
                            0, 0, n, t_s)


def test_settling_summary_on_synthetic_run():
    sched = TrajectorySchedule((1.0, 1.0), ((10.0, 0.0, 0.0), (20.0, 0.0, 0.0)))
    th = np.zeros((200, 3))
    th[:100, 0] = 10.0
    th[100:, 0] = 18.5  # 1.5 deg off with a 1 deg tolerance (5% of 20)
    rows = settling_summary(synthetic(th), sched)
    assert [r.settled for r in rows] == [True, True, True, False, True, True]
    assert rows[3].final_error_deg == pytest.approx(1.5)
    # a run stopped half way only reports the completed segment
    assert len(settling_summary(synthetic(th[:150]), sched)) == 3


def test_trajectory_difference_skips_transients():
    sched = TrajectorySchedule((1.0,), ((0.0, 0.0, 0.0),))
    a = np.zeros((100, 3))
    b = a.copy()
    b[:50, 1] = 30.0
    b[60, 2] = 0.25
    assert trajectory_difference(synthetic(a), synthetic(b), sched) == 0.25
    with pytest.raises(ValueError):
        trajectory_difference(synthetic(a), synthetic(a[:50]), sched)
