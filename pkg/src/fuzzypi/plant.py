"""Three-joint manipulator plant and the closed-loop trajectory experiment.

Joint 1 turns about the vertical axis; joints 2 and 3 pitch the two links in
the vertical plane (theta3 relative to link 2). Links are massless rods with
point masses m2 at the elbow and m3 at the tip, plus a rotor inertia per
joint and viscous friction ``-b * dtheta``::

    M(th) ddth + h(th, dth) + g(th) + b dth = tau

``h`` collects the Coriolis and centrifugal terms derived from M itself, so
the unforced frictionless model conserves ``0.5 dth' M dth + V(th)``.
L3 and L4 (tip offset, base height) only enter :func:`forward_kinematics`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .controller import PIPELINE, ControllerConfig
from .engine import FimEngine
from .inference import RuleBase, default_rule_base
from .membership import MembershipBank, default_bank
from .oracle import ReferenceFim

FIXED = "fixed"
FLOAT = "float"


class SimulationDiverged(RuntimeError):
    """The plant state became non-finite or blew up."""

    def __init__(self, step: int, t: float):
        super().__init__(f"simulation diverged at step {step} (t = {t:.6g} s)")
        self.step, self.t = step, t


@dataclass(frozen=True)
class PlantParams:
    L1: float = 0.135
    L2: float = 0.135
    L3: float = 0.025
    L4: float = 0.135 + 0.035
    m2: float = 0.1
    m3: float = 0.1
    J: tuple[float, float, float] = (0.01, 0.01, 0.01)
    b: tuple[float, float, float] = (0.5, 0.5, 0.5)
    g: float = 9.81

    def __post_init__(self):
        object.__setattr__(self, "J", tuple(float(v) for v in self.J))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if len(self.J) != 3 or len(self.b) != 3:
            raise ValueError("J and b need one value per joint")
        if min(self.L1, self.L2) <= 0 or min(self.m2, self.m3) <= 0:
            raise ValueError("link lengths and masses must be positive")
        if min(self.J) <= 0:
            raise ValueError("rotor inertias must be positive")
        if min(self.b) < 0 or self.g < 0:
            raise ValueError("friction and gravity must be non-negative")

    def packed(self) -> np.ndarray:
        p = np.zeros(K.P_LEN)
        p[K.P_L1], p[K.P_L2], p[K.P_M2], p[K.P_M3] = self.L1, self.L2, self.m2, self.m3
        p[K.P_J1], p[K.P_J2], p[K.P_J3] = self.J
        p[K.P_B1], p[K.P_B2], p[K.P_B3] = self.b
        p[K.P_G] = self.g
        return p

    def replace(self, **kw) -> "PlantParams":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return PlantParams(**d)


@dataclass
class PlantState:
    theta: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dtheta: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.theta = np.array(self.theta, dtype=np.float64).reshape(3)
        self.dtheta = np.array(self.dtheta, dtype=np.float64).reshape(3)

    def check_finite(self) -> None:
        if not (np.all(np.isfinite(self.theta)) and np.all(np.isfinite(self.dtheta))):
            raise SimulationDiverged(-1, float("nan"))


def dynamics(state: PlantState, tau, params: PlantParams) -> np.ndarray:
    """Joint accelerations for the given torques."""
    state.check_finite()
    out = np.zeros(3)
    K.plant_accel(state.theta, state.dtheta, np.asarray(tau, dtype=np.float64), params.packed(), out)
    return out


def gravity_torque(theta, params: PlantParams) -> np.ndarray:
    """Torques that hold the arm still at ``theta``."""
    terms = K.plant_terms(np.asarray(theta, dtype=np.float64), np.zeros(3), params.packed())
    return np.array([0.0, terms[7], terms[8]])


def inertia_matrix(theta, params: PlantParams) -> np.ndarray:
    m11, m22, m23, m33, *_ = K.plant_terms(np.asarray(theta, dtype=np.float64), np.zeros(3),
                                           params.packed())
    return np.array([[m11, 0.0, 0.0], [0.0, m22, m23], [0.0, m23, m33]])


def energy(state: PlantState, params: PlantParams) -> float:
    return float(K.plant_energy(state.theta, state.dtheta, params.packed()))


def forward_kinematics(theta, params: PlantParams) -> np.ndarray:
    """Tip position (x, y, z) with the shoulder L4 above the base."""
    t1, t2, t3 = theta
    reach = params.L1 * math.cos(t2) + params.L2 * math.cos(t2 + t3) + params.L3
    z = params.L4 + params.L1 * math.sin(t2) + params.L2 * math.sin(t2 + t3)
    return np.array([reach * math.cos(t1), reach * math.sin(t1), z])


def rk4_step(state: PlantState, tau, params: PlantParams, h: float) -> PlantState:
    th, dth = state.theta.copy(), state.dtheta.copy()
    K.rk4_step(th, dth, np.asarray(tau, dtype=np.float64), params.packed(), h, np.zeros((10, 3)))
    return PlantState(th, dth)


def simulate_open_loop(state: PlantState, tau, params: PlantParams, h: float,
                       n_steps: int) -> tuple[PlantState, np.ndarray]:
    """Constant-torque RK4 run; returns the final state and the energy history."""
    th, dth = state.theta.copy(), state.dtheta.copy()
    e = np.zeros(n_steps + 1)
    K.rk4_run(th, dth, np.asarray(tau, dtype=np.float64), params.packed(), h, n_steps, e)
    return PlantState(th, dth), e


@dataclass(frozen=True)
class TrajectorySchedule:
    """Piecewise-constant set points in degrees, one row per segment."""

    durations: tuple[float, ...]
    setpoints_deg: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "durations", tuple(float(d) for d in self.durations))
        object.__setattr__(self, "setpoints_deg",
                           tuple(tuple(float(v) for v in row) for row in self.setpoints_deg))
        if len(self.durations) != len(self.setpoints_deg) or not self.durations:
            raise ValueError("one duration per set-point row required")
        if any(d <= 0 for d in self.durations):
            raise ValueError("segment durations must be positive")
        if any(len(r) != 3 for r in self.setpoints_deg):
            raise ValueError("each set-point row needs three joint angles")

    @property
    def total(self) -> float:
        return sum(self.durations)

    @property
    def starts(self) -> tuple[float, ...]:
        return tuple(float(x) for x in np.cumsum((0.0,) + self.durations[:-1]))

    def setpoint(self, t: float) -> tuple[float, float, float]:
        for start, d, sp in zip(self.starts, self.durations, self.setpoints_deg):
            if t < start + d:
                return sp
        return self.setpoints_deg[-1]

    def joint_range(self, joint: int, initial_deg: float = 0.0) -> float:
        vals = [initial_deg] + [r[joint] for r in self.setpoints_deg]
        return max(vals) - min(vals)

    @classmethod
    def default(cls) -> "TrajectorySchedule":
        return cls((2.0,) * 5, (
            (90.0, 45.0, 45.0),
            (0.0, 45.0, 22.5),
            (45.0, 0.0, 0.0),
            (-45.0, 22.5, 22.5),
            (90.0, 45.0, 45.0),
        ))

    def to_dict(self) -> dict:
        return {"durations": list(self.durations), "setpoints_deg": [list(r) for r in self.setpoints_deg]}

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectorySchedule":
        return cls(tuple(d["durations"]), tuple(tuple(r) for r in d["setpoints_deg"]))


@dataclass
class SimulationResult:
    t: np.ndarray
    theta_deg: np.ndarray  # (rows, 3)
    setpoint_deg: np.ndarray
    tau: np.ndarray
    controller: str
    n_bits: int
    div_by_zero: int
    input_saturations: int
    steps: int
    t_s: float

    @property
    def duration(self) -> float:
        return self.steps * self.t_s


# controllers see theta / pi, so 180 degrees maps to 1
ANGLE_SCALE = math.pi


def simulate_closed_loop(cfgs, schedule: TrajectorySchedule | None = None,
                         params: PlantParams | None = None, duration: float | None = None,
                         t_s: float | None = None, controller: str = FIXED,
                         bank: MembershipBank | None = None, rules: RuleBase | None = None,
                         log_every: int = 100, initial: PlantState | None = None) -> SimulationResult:
    """Run three controllers (one per joint) against the plant with RK4 at t_s.

    ``cfgs`` is one :class:`ControllerConfig` or three of them; they must share
    N, T, rounding, mode and t_s. ``controller`` selects the fixed-point
    datapath or the float64 reference inference in the same loop.
    """
    if isinstance(cfgs, ControllerConfig):
        cfgs = (cfgs,) * 3
    cfgs = tuple(cfgs)
    if len(cfgs) != 3:
        raise ValueError("one controller configuration per joint required")
    c0 = cfgs[0]
    for c in cfgs[1:]:
        if (c.n_bits, c.t_bits, c.rounding, c.mode, c.t_s, c.y_max) != \
                (c0.n_bits, c0.t_bits, c0.rounding, c0.mode, c0.t_s, c0.y_max):
            raise ValueError("joint controllers must share N, T, rounding, mode, t_s and y_max")
    if controller not in (FIXED, FLOAT):
        raise ValueError(f"controller must be {FIXED!r} or {FLOAT!r}")
    schedule = schedule or TrajectorySchedule.default()
    params = params or PlantParams()
    bank = bank or default_bank()
    rules = rules or default_rule_base()
    t_s = c0.t_s if t_s is None else t_s
    duration = schedule.total if duration is None else duration
    n_steps = int(round(duration / t_s))
    if log_every < 1:
        raise ValueError("log_every must be >= 1")

    eng = FimEngine(bank, rules, c0.n_bits, c0.t_bits, c0.rounding)
    ref = ReferenceFim(bank, rules)
    cfg_i = np.array([controller_ints(c) for c in cfgs], dtype=np.int64)
    cfg_f = np.array([[c.kp, c.ki, c.v_min, c.v_max] for c in cfgs], dtype=np.float64)
    seg_start = np.array([int(round(s / t_s)) for s in schedule.starts], dtype=np.int64)
    seg_sp = np.radians(np.array(schedule.setpoints_deg, dtype=np.float64))
    init = initial or PlantState()
    rows_max = n_steps // log_every + 1
    log = np.zeros((rows_max, 10))
    counters = np.zeros(3, dtype=np.int64)
    rows = K.closed_loop(n_steps, t_s, params.packed(), init.theta, init.dtheta, seg_start, seg_sp,
                         ANGLE_SCALE, c0.y_max, controller == FIXED, c0.mode == PIPELINE, cfg_i,
                         *eng.kernel_args, cfg_f, ref.fpars, ref.fA, ref.fB, ref.fC,
                         log_every, log, counters)
    if counters[2] >= 0:
        raise SimulationDiverged(int(counters[2]), counters[2] * t_s)
    log = log[:rows]
    return SimulationResult(log[:, 0], np.degrees(log[:, 1:4]), np.degrees(log[:, 4:7]),
                            log[:, 7:10].copy(), controller, c0.n_bits, int(counters[0]),
                            int(counters[1]), n_steps, t_s)


def controller_ints(c: ControllerConfig) -> list[int]:
    """Integer configuration vector consumed by the kernels."""
    out = [0] * K.CI_LEN
    kp_num, kp_shift = _dyadic(c.kp)
    ki_num, ki_shift = _dyadic(c.ki)
    out[K.CI_N], out[K.CI_T], out[K.CI_M], out[K.CI_G] = c.n_bits, c.t_bits, c.M, c.G
    out[K.CI_MODE] = 1 if c.mode == PIPELINE else 0
    out[K.CI_ROUND] = 0 if c.rounding == "floor" else 1
    out[K.CI_KPN], out[K.CI_KPS], out[K.CI_KIN], out[K.CI_KIS] = kp_num, kp_shift, ki_num, ki_shift
    out[K.CI_VMIN], out[K.CI_VMAX] = c.v_min_raw, c.v_max_raw
    if c.M + 1 > 31:
        raise ValueError(f"N={c.n_bits} with y_max={c.y_max} exceeds the int64 loop kernel")
    return out


def _dyadic(x: float):
    from .fixedpoint import dyadic
    return dyadic(x)


@dataclass
class SegmentSummary:
    segment: int
    joint: int
    setpoint_deg: float
    final_error_deg: float  # max |theta - sp| over the settling window
    tolerance_deg: float

    @property
    def settled(self) -> bool:
        return self.final_error_deg <= self.tolerance_deg


def settling_summary(res: SimulationResult, schedule: TrajectorySchedule,
                     fraction: float = 0.05, window: float = 0.1,
                     initial_deg=(0.0, 0.0, 0.0)) -> list[SegmentSummary]:
    """Per segment and joint: worst error over the last ``window`` share of the segment.

    The tolerance is ``fraction`` of the joint's set-point range (initial
    angle included), since a share of the set point itself is meaningless
    for 0-degree targets. Segments the run did not complete are skipped.
    """
    out = []
    for s, (start, d, sp) in enumerate(zip(schedule.starts, schedule.durations,
                                           schedule.setpoints_deg)):
        if start + d > res.duration * (1 + 1e-9):
            break
        mask = (res.t >= start + (1 - window) * d) & (res.t < start + d)
        for j in range(3):
            tol = fraction * schedule.joint_range(j, initial_deg[j])
            err = float(np.max(np.abs(res.theta_deg[mask, j] - sp[j]))) if mask.any() else math.inf
            out.append(SegmentSummary(s, j, sp[j], err, tol))
    return out


def trajectory_difference(a: SimulationResult, b: SimulationResult,
                          schedule: TrajectorySchedule, transient: float = 0.5) -> float:
    """Largest |theta_a - theta_b| (deg) once ``transient`` of every segment has passed."""
    if a.t.shape != b.t.shape or not np.array_equal(a.t, b.t):
        raise ValueError("runs were logged on different time grids")
    mask = np.zeros(a.t.shape, dtype=bool)
    for start, d in zip(schedule.starts, schedule.durations):
        mask |= (a.t >= start + transient * d) & (a.t < start + d)
    return float(np.max(np.abs(a.theta_deg[mask] - b.theta_deg[mask])))
