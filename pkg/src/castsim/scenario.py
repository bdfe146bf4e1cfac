"""Scenario files: everything a run needs, in one JSON document.

The schema is deliberately flat and explicit so scenario files diff well;
unknown keys are rejected rather than ignored to catch typos early.
"""

from __future__ import annotations

import json
import logging
import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .dynamics import RobotParams
from .errors import ScenarioError

log = logging.getLogger("castsim.scenario")

SCHEMA_VERSION = 1
TARGET_SPEED_CAP = 0.5   # m/s, ceiling on commanded target motion


def seed_for(label: str, stream: str) -> np.random.SeedSequence:
    """Deterministic per-scenario, per-stream seed root."""
    key = zlib.crc32(f"{label}/{stream}".encode())
    return np.random.SeedSequence(key)


def _require(d: dict, ctx: str, allowed: set):
    extra = set(d) - allowed
    if extra:
        raise ScenarioError(f"{ctx}: unknown keys {sorted(extra)} "
                            f"(allowed: {sorted(allowed)})")


@dataclass
class TargetModel:
    kind: str = "static"                 # static | constant-velocity |
                                         # waypoints | external
    x: float = 1.81
    y: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    waypoints: tuple = ()                # ((t, x, y), ...)
    _arrivals: tuple = field(default=(), repr=False)

    def __post_init__(self):
        kinds = {"static", "constant-velocity", "waypoints", "external"}
        if self.kind not in kinds:
            raise ScenarioError(f"target.kind must be one of {sorted(kinds)}")
        speed = math.hypot(self.vx, self.vy)
        if speed > TARGET_SPEED_CAP:
            scale = TARGET_SPEED_CAP / speed
            log.warning("target velocity %.3f m/s exceeds the %.1f m/s cap; "
                        "clamped", speed, TARGET_SPEED_CAP)
            self.vx *= scale
            self.vy *= scale
        if self.kind == "waypoints":
            if len(self.waypoints) < 1:
                raise ScenarioError("waypoints target needs >= 1 waypoint")
            wps = [(float(t), float(x), float(y))
                   for t, x, y in self.waypoints]
            if any(b[0] <= a[0] for a, b in zip(wps, wps[1:])):
                raise ScenarioError("waypoint times must strictly increase")
            # the target cannot outrun the speed cap: segments that ask for
            # more are stretched in time (arrival slips, path unchanged)
            arrivals = [max(wps[0][0], 0.0)]
            for a, b in zip(wps, wps[1:]):
                dist = math.hypot(b[1] - a[1], b[2] - a[2])
                slot = b[0] - arrivals[-1]
                need = dist / TARGET_SPEED_CAP
                if need > slot + 1e-12:
                    log.warning("waypoint at t=%.3f implies %.2f m/s; "
                                "arrival slips to %.3f s", b[0],
                                dist / max(slot, 1e-9), arrivals[-1] + need)
                arrivals.append(arrivals[-1] + max(slot, need))
            self.waypoints = tuple(wps)
            self._arrivals = tuple(arrivals)

    def position(self, t: float):
        if self.kind == "static" or self.kind == "external":
            return (self.x, self.y)
        if self.kind == "constant-velocity":
            return (self.x + self.vx * t, self.y + self.vy * t)
        wps, arr = self.waypoints, self._arrivals
        if t <= arr[0]:
            start = (self.x, self.y)
            # approach the first waypoint from the rest position
            if arr[0] <= 0.0:
                return (wps[0][1], wps[0][2])
            f = max(0.0, min(1.0, t / arr[0]))
            return (start[0] + f * (wps[0][1] - start[0]),
                    start[1] + f * (wps[0][2] - start[1]))
        for (ta, a), (tb, b) in zip(zip(arr, wps), zip(arr[1:], wps[1:])):
            if t <= tb:
                f = (t - ta) / (tb - ta)
                return (a[1] + f * (b[1] - a[1]), a[2] + f * (b[2] - a[2]))
        return (wps[-1][1], wps[-1][2])

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "x": self.x, "y": self.y}
        if self.kind == "constant-velocity":
            d["vx"], d["vy"] = self.vx, self.vy
        if self.kind == "waypoints":
            d["waypoints"] = [list(w) for w in self.waypoints]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TargetModel":
        _require(d, "target", {"kind", "x", "y", "vx", "vy", "waypoints"})
        return cls(kind=d.get("kind", "static"),
                   x=float(d.get("x", 1.81)), y=float(d.get("y", 0.0)),
                   vx=float(d.get("vx", 0.0)), vy=float(d.get("vy", 0.0)),
                   waypoints=tuple(tuple(w) for w in d.get("waypoints", ())))


@dataclass
class VisionSpec:
    sigma_px: float = 0.0
    period: float = 0.0625
    quantize: bool = False
    H_true: list | None = None           # row-major 3x3, pixel -> world
    H_est: list | None = None

    def __post_init__(self):
        if self.period <= 0.0:
            raise ScenarioError("vision.period must be positive")
        if self.sigma_px < 0.0:
            raise ScenarioError("vision.sigma_px must be >= 0")
        for name in ("H_true", "H_est"):
            h = getattr(self, name)
            if h is not None and np.asarray(h, dtype=float).shape != (3, 3):
                raise ScenarioError(f"vision.{name} must be a 3x3 matrix")

    def to_dict(self) -> dict:
        d = {"sigma_px": self.sigma_px, "period": self.period,
             "quantize": self.quantize}
        if self.H_true is not None:
            d["H_true"] = [list(map(float, r)) for r in self.H_true]
        if self.H_est is not None:
            d["H_est"] = [list(map(float, r)) for r in self.H_est]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VisionSpec":
        _require(d, "vision",
                 {"sigma_px", "period", "quantize", "H_true", "H_est"})
        return cls(sigma_px=float(d.get("sigma_px", 0.0)),
                   period=float(d.get("period", 0.0625)),
                   quantize=bool(d.get("quantize", False)),
                   H_true=d.get("H_true"), H_est=d.get("H_est"))


@dataclass
class ControllerSpec:
    kind: str = "piecewise"              # impulse | piecewise
    u_max: float = 10.0                  # flight-phase cable force bound [N]
    catch_radius: float = 0.05
    amp_max: float = 0.55                # swing-up excitation amplitude [rad]
    ramp_time: float = 4.0
    release_margin: float = 0.1          # release when x_land > x_t + margin
    use_table: bool = False
    table_path: str | None = None

    def __post_init__(self):
        if self.kind not in ("impulse", "piecewise"):
            raise ScenarioError("controller.kind must be impulse|piecewise")
        for name in ("u_max", "catch_radius", "amp_max", "ramp_time"):
            if getattr(self, name) <= 0.0:
                raise ScenarioError(f"controller.{name} must be positive")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "u_max": self.u_max,
             "catch_radius": self.catch_radius, "amp_max": self.amp_max,
             "ramp_time": self.ramp_time,
             "release_margin": self.release_margin}
        if self.use_table:
            d["use_table"] = True
        if self.table_path is not None:
            d["table_path"] = self.table_path
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ControllerSpec":
        _require(d, "controller",
                 {"kind", "u_max", "catch_radius", "amp_max", "ramp_time",
                  "release_margin", "use_table", "table_path"})
        kw = {k: d[k] for k in d}
        return cls(**kw)


@dataclass
class TimingSpec:
    dt: float = 5e-4
    duration: float = 20.0

    def __post_init__(self):
        if self.dt <= 0.0 or self.duration <= 0.0:
            raise ScenarioError("timing.dt and timing.duration must be "
                                "positive")

    def to_dict(self) -> dict:
        return {"dt": self.dt, "duration": self.duration}

    @classmethod
    def from_dict(cls, d: dict) -> "TimingSpec":
        _require(d, "timing", {"dt", "duration"})
        return cls(dt=float(d.get("dt", 5e-4)),
                   duration=float(d.get("duration", 20.0)))


@dataclass
class Scenario:
    label: str = "scenario"
    robot: RobotParams = field(default_factory=RobotParams)
    target: TargetModel = field(default_factory=TargetModel)
    vision: VisionSpec = field(default_factory=VisionSpec)
    controller: ControllerSpec = field(default_factory=ControllerSpec)
    timing: TimingSpec = field(default_factory=TimingSpec)
    start: str = "ground"                # ground | flight
    flight_init: tuple | None = None     # (x, y, vx, vy) when start=flight

    def __post_init__(self):
        if self.start not in ("ground", "flight"):
            raise ScenarioError("start must be ground|flight")
        if self.start == "flight":
            if self.flight_init is None or len(self.flight_init) != 4:
                raise ScenarioError("flight start needs flight_init "
                                    "= [x, y, vx, vy]")
            self.flight_init = tuple(float(v) for v in self.flight_init)

    def to_dict(self) -> dict:
        d = {"schema_version": SCHEMA_VERSION,
             "label": self.label,
             "robot": {k: getattr(self.robot, k)
                       for k in ("x_base", "y_base", "a1", "l1", "m1", "m3",
                                 "I1", "I3", "g", "q3_nominal")},
             "target": self.target.to_dict(),
             "vision": self.vision.to_dict(),
             "controller": self.controller.to_dict(),
             "timing": self.timing.to_dict(),
             "start": self.start}
        if self.flight_init is not None:
            d["flight_init"] = list(self.flight_init)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        _require(d, "scenario",
                 {"schema_version", "label", "robot", "target", "vision",
                  "controller", "timing", "start", "flight_init"})
        ver = d.get("schema_version")
        if ver != SCHEMA_VERSION:
            raise ScenarioError(f"schema_version {ver!r} unsupported "
                                f"(this build reads {SCHEMA_VERSION})")
        robot_d = dict(d.get("robot", {}))
        _require(robot_d, "robot",
                 {"x_base", "y_base", "a1", "l1", "m1", "m3", "I1", "I3",
                  "g", "q3_nominal"})
        try:
            robot = RobotParams(**robot_d)
        except ValueError as e:
            raise ScenarioError(f"robot: {e}") from e
        return cls(label=str(d.get("label", "scenario")),
                   robot=robot,
                   target=TargetModel.from_dict(d.get("target", {})),
                   vision=VisionSpec.from_dict(d.get("vision", {})),
                   controller=ControllerSpec.from_dict(
                       d.get("controller", {})),
                   timing=TimingSpec.from_dict(d.get("timing", {})),
                   start=d.get("start", "ground"),
                   flight_init=d.get("flight_init"))


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: not valid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be an object")
    return Scenario.from_dict(doc)


def save_scenario(scn: Scenario, path):
    with open(path, "w") as fh:
        json.dump(scn.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
