"""Casting simulation harness.

Two clocks: physics at timing.dt (RK4), decisions at the vision frame
period.  A run walks phase startup -> steering -> terminal; the throw is
the startup/steering hand-off, and the trace records one row per control
tick plus a final row at the terminating event.

Observations are captured on the frame clock and delivered one tick later,
so every control decision uses data at least one frame old — the same
latency the live websocket path has.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .control import (ForceSchedule, ImpulseController, TargetObservation,
                      TrackingGains, braking_time, linearizing_feedback,
                      load_lookup_table, predict_x_land,
                      replan_on_measurement, swing_reference,
                      tracking_inputs)
from .dynamics import (JointState, PlanarFlightState, flight_accel_planar,
                       forward_kinematics, jacobian, link_tip,
                       planar_joint_accel)
from .errors import NeverLandsError, ScenarioError, TraceMismatchError
from .scenario import Scenario, seed_for
from .vision import apply_homography

TRACE_COLUMNS = ("t", "phase", "q1", "q2", "q3", "qd1", "qd2", "qd3",
                 "xe", "ye", "xde", "yde", "taut", "tau1", "f3", "u_cmd",
                 "obs_t", "obs_x", "obs_y", "event")

TERMINAL_COMMIT_DIST = 0.15   # m; stop replanning inside this radius


@dataclass
class Outcome:
    result: str                 # caught | missed | timeout
    min_distance: float
    t_throw: float | None
    t_brake: float | None
    t_terminal: float | None
    t_end: float


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))   # plain float repr even for numpy scalars
    return str(v)


class CastingSim:
    """Stepped simulation of one scenario; the server and the batch runner
    share this object so both paths produce identical traces."""

    def __init__(self, scn: Scenario):
        self.scn = scn
        p = scn.robot
        self.p = p
        self.dt = scn.timing.dt
        ratio = scn.vision.period / self.dt
        self.ticks = int(round(ratio))
        if abs(ratio - self.ticks) > 1e-9 or self.ticks < 1:
            raise ScenarioError("vision.period must be an integer multiple "
                                "of timing.dt")
        self.gains = TrackingGains()
        self.ref = swing_reference(p, scn.controller.amp_max,
                                   scn.controller.ramp_time)
        self.rng = np.random.default_rng(seed_for(scn.label, "vision"))
        self.H_true = (np.asarray(scn.vision.H_true, dtype=float)
                       if scn.vision.H_true is not None else None)
        self.H_est = (np.asarray(scn.vision.H_est, dtype=float)
                      if scn.vision.H_est is not None else None)
        self.table = (load_lookup_table(scn.controller.table_path)
                      if scn.controller.table_path else None)

        self.steps = 0
        self.min_dist = math.inf
        self.events: list = []
        self.outcome: Outcome | None = None
        self.t_throw = self.t_brake = self.t_terminal = None
        self.latest_obs: TargetObservation | None = None
        self._pending_obs: TargetObservation | None = None
        self.u_cmd = 0.0
        self.tau1 = 0.0
        self.f3 = 0.0
        self.taut = False
        self.live_target: tuple | None = None   # server override
        self.impulse: ImpulseController | None = None
        self.schedule: ForceSchedule | None = None
        self._prev_d: float | None = None

        if scn.start == "ground":
            self.phase = "startup"
            self.mode = "ground"
            self.q = np.zeros(3)
            self.q[2] = p.q3_nominal
            self.qd = np.zeros(3)
            self.fs = None
        else:
            x, y, vx, vy = scn.flight_init
            self.phase = "steering"
            self.mode = "flight"
            self.t_throw = 0.0
            self.q = np.zeros(3)
            self.q[2] = p.q3_nominal
            self.qd = np.zeros(3)
            self.fs = PlanarFlightState(x, y, vx, vy,
                                        anchor=(p.x_base, p.y_base))
            self._init_flight_controller(0.0)
        self.rho = 0.0
        self.phi = 0.0
        self.phid = 0.0

    # ------------------------------------------------------------------
    @property
    def t(self) -> float:
        return self.steps * self.dt

    def true_target(self, t: float) -> np.ndarray:
        if self.live_target is not None:
            return np.asarray(self.live_target, dtype=float)
        return np.asarray(self.scn.target.position(t), dtype=float)

    def _target_hint(self) -> np.ndarray:
        if self.latest_obs is not None:
            return np.array([self.latest_obs.x, self.latest_obs.y])
        return np.asarray(self.scn.target.position(0.0), dtype=float)

    def ee_state(self):
        """(x, y, xd, yd) of the end effector in the current mode."""
        if self.mode == "ground":
            state = JointState(q=self.q, qd=self.qd)
            x, y, _ = forward_kinematics(self.p, state)
            vx, vy, _ = jacobian(self.p, state) @ self.qd
            return x, y, vx, vy
        if self.mode == "pendulum":
            ax, ay = self.fs.anchor
            c, s = math.cos(self.phi), math.sin(self.phi)
            return (ax + self.rho * c, ay + self.rho * s,
                    -self.rho * self.phid * s, self.rho * self.phid * c)
        return self.fs.x_e, self.fs.y_e, self.fs.xd_e, self.fs.yd_e

    # ------------------------------------------------------------------
    def _capture_obs(self, t: float):
        xy = self.true_target(t)
        v = self.scn.vision
        if self.H_true is not None:
            px = apply_homography(np.linalg.inv(self.H_true), xy)
            px = px + self.rng.normal(0.0, v.sigma_px, 2)
            if v.quantize:
                px = np.round(px)
            H = self.H_est if self.H_est is not None else self.H_true
            xy = apply_homography(H, px)
        elif v.sigma_px > 0.0:
            xy = xy + self.rng.normal(0.0, v.sigma_px, 2)
        self._pending_obs = TargetObservation(t=t, x=float(xy[0]),
                                              y=float(xy[1]))

    def _init_flight_controller(self, t: float):
        ctl = self.scn.controller
        hint = self._target_hint()
        if ctl.kind == "impulse":
            self.impulse = ImpulseController(m=self.p.m3, g=self.p.g)
            obs0 = TargetObservation(t=t, x=float(hint[0]), y=float(hint[1]))
            self.impulse.on_observation(self.fs, obs0, t)
            self.schedule = None
        else:
            self.impulse = None
            self.schedule = ForceSchedule(u_max=ctl.u_max)
            obs0 = TargetObservation(t=t, x=float(hint[0]), y=float(hint[1]))
            replan_on_measurement(self.fs, obs0, self.table, self.schedule,
                                  self.p.m3, self.p.g)
            self.u_cmd = self.schedule.force_at(t)

    def _release(self, t: float):
        x, y, vx, vy = self.ee_state()
        anchor = link_tip(self.p, self.q[0])
        self.fs = PlanarFlightState(x, y, vx, vy,
                                    anchor=(float(anchor[0]),
                                            float(anchor[1])))
        self.phase = "steering"
        self.mode = "flight"
        self.t_throw = t
        self.events.append("throw")
        self._init_flight_controller(t)

    def _release_due(self, t: float) -> bool:
        """Ballistic landing prediction crosses the hint; checked every
        physics step because the prediction sweeps quickly mid-swing."""
        if self.phase != "startup" or t < 1.0:
            return False
        x, y, vx, vy = self.ee_state()
        if vx <= 0.0:
            return False
        fs = PlanarFlightState(x, y, vx, vy, anchor=(0.0, 0.0))
        hint = self._target_hint()
        try:
            return (predict_x_land(fs, self.p.g)
                    >= hint[0] + self.scn.controller.release_margin)
        except NeverLandsError:
            return False

    def _control_update(self):
        t = self.t
        if self.mode == "ground":
            return
        if self.phase == "terminal":
            return
        obs = self.latest_obs
        if obs is None:
            return
        if self.impulse is not None:
            if self.impulse.t_b is None or t < self.impulse.t_b:
                self.impulse.on_observation(self.fs, obs, t)
        elif self.schedule is not None:
            if (not self.schedule.segments
                    or obs.t > self.schedule.segments[-1][0]):
                replan_on_measurement(self.fs, obs, self.table,
                                      self.schedule, self.p.m3, self.p.g)
            self.u_cmd = self.schedule.force_at(t)

    # ------------------------------------------------------------------
    def _ground_rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        state = JointState(q=y[:3], qd=y[3:])
        ref = self.ref.evaluate(t)
        u2, u3 = tracking_inputs(ref, state, self.gains)
        out = linearizing_feedback(self.p, state, u2, u3)
        f3 = out.f3 if out.taut else 0.0
        qdd = planar_joint_accel(self.p, state, out.tau1, f3)
        return np.concatenate([y[3:], qdd])

    def _boundary_actuation(self):
        """Actuator values at the tick instant, for the trace."""
        if self.mode == "ground":
            state = JointState(q=self.q, qd=self.qd)
            ref = self.ref.evaluate(self.t)
            u2, u3 = tracking_inputs(ref, state, self.gains)
            out = linearizing_feedback(self.p, state, u2, u3)
            self.tau1 = out.tau1
            self.f3 = out.f3 if out.taut else 0.0
            self.taut = out.taut
        elif self.mode == "flight":
            self.tau1 = 0.0
            applied = self.u_cmd if self.schedule is not None else 0.0
            self.f3 = applied
            self.taut = applied > 0.0
        elif self.mode == "pendulum":
            self.tau1 = 0.0
            tension = self.p.m3 * (self.rho * self.phid ** 2
                                   - self.p.g * math.sin(self.phi))
            self.f3 = tension
            self.taut = True
        else:   # slack
            self.tau1 = 0.0
            self.f3 = 0.0
            self.taut = False

    def _flight_rhs(self, y: np.ndarray, u: float) -> np.ndarray:
        fs = PlanarFlightState(y[0], y[1], y[2], y[3], anchor=self.fs.anchor)
        ax, ay = flight_accel_planar(fs, self.p.m3, self.p.g, u)
        return np.array([y[2], y[3], ax, ay])

    def _pendulum_rhs(self, y: np.ndarray) -> np.ndarray:
        return np.array([y[1],
                         -(self.p.g / self.rho) * math.cos(y[0])])

    def _rk4(self, f, y):
        h = self.dt
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def _rk4_t(self, f, t, y):
        h = self.dt
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def _enter_pendulum(self, t: float, initial: bool = True):
        ax, ay = self.fs.anchor
        dx, dy = self.fs.x_e - ax, self.fs.y_e - ay
        self.rho = math.hypot(dx, dy)
        self.phi = math.atan2(dy, dx)
        tx, ty = -math.sin(self.phi), math.cos(self.phi)
        self.phid = (self.fs.xd_e * tx + self.fs.yd_e * ty) / self.rho
        self.mode = "pendulum"
        if initial:
            if self.phase != "terminal":
                self.phase = "terminal"
                self.t_terminal = t
            self.t_brake = t
            self.events.append("brake")

    def _finish(self, result: str, t: float):
        self.outcome = Outcome(result=result, min_distance=self.min_dist,
                               t_throw=self.t_throw, t_brake=self.t_brake,
                               t_terminal=self.t_terminal, t_end=t)
        self.events.append(result)

    def _integrate_window(self):
        for _ in range(self.ticks):
            if self.outcome is not None:
                return
            self._one_step()

    def _one_step(self):
        ctl = self.scn.controller
        t0 = self.t
        if self.mode == "ground":
            y = self._rk4_t(self._ground_rhs, t0,
                            np.concatenate([self.q, self.qd]))
            self.q, self.qd = y[:3].copy(), y[3:].copy()
        elif self.mode == "flight":
            u = self.u_cmd if self.schedule is not None else 0.0
            y = self._rk4(lambda s: self._flight_rhs(s, u),
                          self.fs.as_array())
            self.fs = PlanarFlightState(y[0], y[1], y[2], y[3],
                                        anchor=self.fs.anchor)
        elif self.mode == "pendulum":
            y = self._rk4(self._pendulum_rhs,
                          np.array([self.phi, self.phid]))
            self.phi, self.phid = float(y[0]), float(y[1])
            tension = (self.rho * self.phid ** 2
                       - self.p.g * math.sin(self.phi))
            if tension < 0.0:
                x, ye, vx, vy = self.ee_state()
                self.fs = PlanarFlightState(x, ye, vx, vy,
                                            anchor=self.fs.anchor)
                self.mode = "slack"
        else:   # slack ballistic inside the tether circle
            y = self._rk4(lambda s: self._flight_rhs(s, 0.0),
                          self.fs.as_array())
            self.fs = PlanarFlightState(y[0], y[1], y[2], y[3],
                                        anchor=self.fs.anchor)
            ax, ay = self.fs.anchor
            if math.hypot(self.fs.x_e - ax,
                          self.fs.y_e - ay) >= self.rho:
                self._enter_pendulum(self.t, initial=False)
        self.steps += 1
        t = self.t

        if self.mode == "ground" and self._release_due(t):
            self._release(t)

        # impulse braking instant falls on the physics grid
        if (self.mode == "flight" and self.impulse is not None
                and self.impulse.t_b is not None
                and t >= self.impulse.t_b):
            self._enter_pendulum(t)

        if self.mode != "ground":
            x, ye, vx, vy = self.ee_state()
            d = float(np.hypot(*(np.array([x, ye])
                                 - self.true_target(t))))
            if d < self.min_dist:
                self.min_dist = d
            if self.mode == "flight" and self.schedule is not None:
                if (self.phase == "steering"
                        and d <= TERMINAL_COMMIT_DIST):
                    self.phase = "terminal"
                    self.t_terminal = t
                    self.events.append("terminal")
                if self.phase == "terminal":
                    # lock the winch once the unreeled length matches
                    # the target's radius about the anchor: the swing
                    # then closes the remaining gap along the circle
                    ax, ay = self.fs.anchor
                    hint = self._target_hint()
                    mism = (math.hypot(x - ax, ye - ay)
                            - math.hypot(hint[0] - ax, hint[1] - ay))
                    receding = (self._prev_d is not None
                                and d > self._prev_d)
                    if abs(mism) <= ctl.catch_radius or receding:
                        self._enter_pendulum(t)
            self._prev_d = d
            if d <= ctl.catch_radius:
                self._finish("caught", t)
                return
            if ye < -1e-9:
                self._finish("missed", t)
                return
        if t >= self.scn.timing.duration - 1e-12:
            self._finish("timeout", t)
            return

    # ------------------------------------------------------------------
    def _row(self) -> list:
        x, ye, vx, vy = self.ee_state()
        obs = self.latest_obs
        ev = "+".join(self.events)
        self.events = []
        return [self.t, self.phase,
                float(self.q[0]), float(self.q[1]), float(self.q[2]),
                float(self.qd[0]), float(self.qd[1]), float(self.qd[2]),
                float(x), float(ye), float(vx), float(vy),
                int(self.taut), float(self.tau1), float(self.f3),
                float(self.u_cmd),
                float(obs.t) if obs else -1.0,
                float(obs.x) if obs else 0.0,
                float(obs.y) if obs else 0.0,
                ev]

    def _tick_boundary(self) -> list:
        if self._pending_obs is not None:
            self.latest_obs = self._pending_obs
            self._pending_obs = None
        self._control_update()
        self._boundary_actuation()
        row = self._row()
        self._capture_obs(self.t)
        return row

    def step_tick(self) -> list:
        """One control period: decide, log, integrate, observe.

        Returns the trace row written at the tick start; after the final
        window, `outcome` is set and `final_row()` has the closing row.
        """
        row = self._tick_boundary()
        self._integrate_window()
        return row

    def advance_steps(self, n: int):
        """Sub-tick stepping for the live server: same decision points as
        step_tick, but callable a few physics steps at a time so state can
        be published faster than the control rate."""
        for _ in range(n):
            if self.outcome is not None:
                return
            if self.steps % self.ticks == 0:
                self._tick_boundary()
            self._one_step()

    def final_row(self) -> list:
        self._boundary_actuation()
        return self._row()

    def run(self, trace_path=None) -> Outcome:
        rows = []
        while self.outcome is None:
            rows.append(self.step_tick())
        rows.append(self.final_row())
        if trace_path is not None:
            write_trace(trace_path, rows)
        return self.outcome


def write_trace(path, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_trace(path):
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != ",".join(TRACE_COLUMNS):
        raise TraceMismatchError(f"{path}: bad or missing trace header")
    return lines[1:]


def run_scenario(scn: Scenario, trace_path=None) -> Outcome:
    return CastingSim(scn).run(trace_path=trace_path)


def replay_check(trace_path, scn: Scenario) -> Outcome:
    """Re-run the scenario and demand a byte-identical trace."""
    recorded = read_trace(trace_path)
    sim = CastingSim(scn)
    rows = []
    while sim.outcome is None:
        rows.append(sim.step_tick())
    rows.append(sim.final_row())
    fresh = [",".join(_fmt(v) for v in row) for row in rows]
    if len(fresh) != len(recorded):
        raise TraceMismatchError(
            f"trace length differs: recorded {len(recorded)} rows, "
            f"replay produced {len(fresh)}")
    for i, (a, b) in enumerate(zip(recorded, fresh)):
        if a != b:
            raise TraceMismatchError(
                f"trace diverges at data row {i}: recorded {a!r} "
                f"vs replay {b!r}")
    return sim.outcome
