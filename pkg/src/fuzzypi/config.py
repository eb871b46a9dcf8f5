"""JSON experiment configuration: bank, rules, plant, schedule, controller and runs.

Every section is optional; missing ones fall back to the defaults. Unknown
keys are rejected so typos do not silently fall back to a default.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

from .controller import ControllerConfig
from .inference import RuleBase, additive_rule_base, default_rule_base
from .membership import MembershipBank, default_bank
from .plant import PlantParams, TrajectorySchedule

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


def _check_ints(*vals):
    for v in vals:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValueError(f"expected an integer, got {v!r}")


@dataclass
class SurfaceRun:
    n_bits: int = 8
    t_bits: int = 4
    grid_size: int = 100

    def __post_init__(self):
        _check_ints(self.n_bits, self.t_bits)
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")


@dataclass
class SweepRun:
    n_bits: list = field(default_factory=lambda: [8, 10, 12, 14, 16])
    t_bits: list = field(default_factory=lambda: [4, 6, 8, 10])
    grid_size: int = 100

    def __post_init__(self):
        self.n_bits, self.t_bits = list(self.n_bits), list(self.t_bits)
        _check_ints(*self.n_bits, *self.t_bits)
        if not self.n_bits or not self.t_bits:
            raise ValueError("n_bits and t_bits need at least one value")
        if self.grid_size < 2:
            raise ValueError("grid_size must be at least 2")


@dataclass
class RobotRun:
    n_bits: list = field(default_factory=lambda: [12, 14, 16])
    duration: float | None = None
    log_every: int = 100
    reference: bool = True
    settle_fraction: float = 0.05
    settle_window: float = 0.1
    transient: float = 0.5

    def __post_init__(self):
        self.n_bits = list(self.n_bits)
        _check_ints(*self.n_bits, self.log_every)
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        if self.duration is not None and not self.duration > 0:
            raise ValueError("duration must be positive")
        for name in ("settle_fraction", "settle_window", "transient"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")


@dataclass
class ExperimentConfig:
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    bank: MembershipBank = field(default_factory=default_bank)
    rules: RuleBase = field(default_factory=default_rule_base)
    plant: PlantParams = field(default_factory=PlantParams)
    schedule: TrajectorySchedule = field(default_factory=TrajectorySchedule.default)
    surface: SurfaceRun = field(default_factory=SurfaceRun)
    sweep: SweepRun = field(default_factory=SweepRun)
    robot: RobotRun = field(default_factory=RobotRun)


def _build(cls, d, section):
    if not isinstance(d, dict):
        raise ConfigError(f"[{section}] must be an object")
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _rules_from(d) -> RuleBase:
    if not isinstance(d, dict):
        raise ConfigError("[rules] must be an object")
    try:
        if "additive" in d:
            a = d["additive"]
            return additive_rule_base(a["centers"], a.get("centers1"),
                                      Fraction(str(a.get("limit", "3/4"))))
        sizes = tuple(int(s) for s in d["sizes"])
        if len(sizes) != 2:
            raise ConfigError("[rules] sizes must have two entries")
        rows = [(r[0], r[1], Fraction(str(r[2])), Fraction(str(r[3])), Fraction(str(r[4])))
                for r in d["rows"]]
        return RuleBase.from_rows(sizes, rows)
    except ConfigError:
        raise
    except (KeyError, IndexError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"[rules] {exc!r}") from None


def _bank_from(d) -> MembershipBank:
    try:
        return MembershipBank.from_dict(d)
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"[bank] {exc!r}") from None


def _plant_from(d) -> PlantParams:
    if isinstance(d, dict):
        d = dict(d)
        for k in ("J", "b"):
            if k in d and isinstance(d[k], list):
                d[k] = tuple(d[k])
    return _build(PlantParams, d, "plant")


def _schedule_from(d) -> TrajectorySchedule:
    try:
        return TrajectorySchedule.from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"[schedule] {exc!r}") from None


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("configuration root must be an object")
    d = dict(d)
    version = d.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r}")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    cfg = ExperimentConfig()
    if "controller" in d:
        cfg.controller = _build(ControllerConfig, d["controller"], "controller")
    if "bank" in d:
        cfg.bank = _bank_from(d["bank"])
    if "rules" in d:
        cfg.rules = _rules_from(d["rules"])
    if tuple(cfg.bank.sizes) != tuple(cfg.rules.sizes):
        raise ConfigError(f"bank sizes {cfg.bank.sizes} do not match rule grid {cfg.rules.sizes}")
    if "plant" in d:
        cfg.plant = _plant_from(d["plant"])
    if "schedule" in d:
        cfg.schedule = _schedule_from(d["schedule"])
    if "surface" in d:
        cfg.surface = _build(SurfaceRun, d["surface"], "surface")
    if "sweep" in d:
        cfg.sweep = _build(SweepRun, d["sweep"], "sweep")
    if "robot" in d:
        cfg.robot = _build(RobotRun, d["robot"], "robot")
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    return config_from_dict(data)


def _num(v: Fraction):
    return str(v) if v.denominator != 1 else int(v)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Round-trippable dict (rules written out row by row)."""
    c = cfg.controller
    return {
        "version": CONFIG_VERSION,
        "controller": {f.name: getattr(c, f.name) for f in fields(ControllerConfig)},
        "bank": cfg.bank.to_dict(),
        "rules": {
            "sizes": list(cfg.rules.sizes),
            "rows": [[l, k, _num(a), _num(b), _num(cc)] for l, k, a, b, cc in cfg.rules.rows()],
        },
        "plant": {f.name: (list(getattr(cfg.plant, f.name))
                           if isinstance(getattr(cfg.plant, f.name), tuple)
                           else getattr(cfg.plant, f.name))
                  for f in fields(PlantParams)},
        "schedule": cfg.schedule.to_dict(),
        "surface": vars(cfg.surface).copy(),
        "sweep": vars(cfg.sweep).copy(),
        "robot": vars(cfg.robot).copy(),
    }
