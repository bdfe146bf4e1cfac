"""Planar control laws: decoupling feedback, swing pumping, landing
prediction, the single-brake impulse controller, and the piecewise-constant
visual-feedback force controller with its lookup table."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    JointState,
    PlanarFlightState,
    RobotParams,
    coriolis_matrix,
    gravity_vector,
    integrate_step,
    mass_matrix,
)
from .errors import NeverLandsError, SingularDecouplingError

LUT_FORMAT = "castsim-lut 1"


@dataclass(frozen=True)
class TrackingGains:
    kp2: float = 100.0
    kv2: float = 20.0
    kp3: float = 100.0
    kv3: float = 20.0

    def __post_init__(self):
        if min(self.kp2, self.kv2, self.kp3, self.kv3) <= 0.0:
            raise ValueError("tracking gains must be strictly positive")


@dataclass
class TargetObservation:
    t: float
    x: float
    y: float

    @property
    def p(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass
class LinearizingOutput:
    tau1: float
    f3: float
    taut: bool   # False when the law demanded a pushing cable (f3 < 0)


def linearizing_feedback(p: RobotParams, state: JointState,
                         u2: float, u3: float) -> LinearizingOutput:
    """Torque/cable force making the closed loop read qdd2 = u2, qdd3 = u3.

    Solving rows of B qdd + C qd + G = (tau1, 0, -f3) for (qdd1, tau1, f3)
    with qdd2, qdd3 prescribed.  Row 2 gives qdd1, rows 1 and 3 then give
    the inputs.  Singular exactly when b21 vanishes.
    """
    B = mass_matrix(p, state.q)
    gam = -coriolis_matrix(p, state.q, state.qd) @ state.qd \
        - gravity_vector(p, state.q)
    b11, b12, b13 = B[0]
    b21, b22, b23 = B[1]
    b31, b32, b33 = B[2]
    g1, g2, g3 = gam
    if abs(b21) < 1e-9:
        raise SingularDecouplingError(f"b21 = {b21:.3e}")
    tau1 = ((b12 * b21 - b11 * b22) * u2 + (b13 * b21 - b11 * b23) * u3
            + b11 * g2 - b21 * g1) / b21
    f3 = ((b31 * b22 - b21 * b32) * u2 + (b31 * b23 - b21 * b33) * u3
          + b21 * g3 - b31 * g2) / b21
    return LinearizingOutput(tau1=tau1, f3=f3, taut=f3 >= 0.0)


@dataclass
class RefPoint:
    q2: float
    q2d: float
    q2dd: float
    q3: float
    q3d: float
    q3dd: float


def tracking_inputs(ref: RefPoint, state: JointState,
                    gains: TrackingGains) -> tuple:
    """PD plus feedforward; error dynamics e'' + kv e' + kp e = 0 per channel."""
    q1, q2, q3 = state.q
    qd1, qd2, qd3 = state.qd
    u2 = ref.q2dd + gains.kv2 * (ref.q2d - qd2) + gains.kp2 * (ref.q2 - q2)
    u3 = ref.q3dd + gains.kv3 * (ref.q3d - qd3) + gains.kp3 * (ref.q3 - q3)
    return u2, u3


def beta_coefficient(p: RobotParams) -> float:
    """Stiffness of the residual swing once q2, q3 are held at their references."""
    q3b = p.q3_nominal
    return p.m3 * p.g * q3b / (p.I3 + p.m3 * (q3b ** 2 + p.a1 * q3b))


@dataclass
class SwingReference:
    """Pumping reference: a resonant q2 sinusoid with an amplitude ramp,
    frozen to constants once the simulator switches to maintenance."""

    omega: float
    q3_bar: float
    amp_max: float = 0.55
    ramp_time: float = 4.0
    switch_time: float | None = None   # set by the harness at hand-off
    q2_hold: float = 0.0

    def evaluate(self, t: float) -> RefPoint:
        if self.switch_time is not None and t >= self.switch_time:
            return RefPoint(self.q2_hold, 0.0, 0.0, self.q3_bar, 0.0, 0.0)
        w = self.omega
        s, c = math.sin(w * t), math.cos(w * t)
        if t < self.ramp_time:
            a = self.amp_max * t / self.ramp_time
            ad = self.amp_max / self.ramp_time
        else:
            a = self.amp_max
            ad = 0.0
        q2 = a * s
        q2d = ad * s + a * w * c
        q2dd = 2.0 * ad * w * c - a * w * w * s
        return RefPoint(q2, q2d, q2dd, self.q3_bar, 0.0, 0.0)

    def hold_at(self, t: float):
        """Freeze the q2 reference at its current value (maintenance)."""
        self.q2_hold = self.evaluate(t).q2
        self.switch_time = t


def swing_reference(p: RobotParams, amp_max: float = 0.55,
                    ramp_time: float = 4.0) -> SwingReference:
    return SwingReference(omega=math.sqrt(beta_coefficient(p)),
                          q3_bar=p.q3_nominal,
                          amp_max=amp_max, ramp_time=ramp_time)


# ---------------------------------------------------------------------------
# zero dynamics of the free swing

def zero_dynamics_rhs(beta: float):
    def f(y):
        return np.array([y[1], -beta * math.sin(y[0])])
    return f


def simulate_zero_dynamics(p: RobotParams, q1_0: float, qd1_0: float,
                           duration: float, dt: float = 5e-4) -> np.ndarray:
    """Integrate the residual swing; returns samples (t, q1, qd1) per step."""
    f = zero_dynamics_rhs(beta_coefficient(p))
    n = int(round(duration / dt))
    out = np.empty((n + 1, 3))
    y = np.array([q1_0, qd1_0])
    out[0] = (0.0, *y)
    for k in range(n):
        y = integrate_step(f, y, dt)
        out[k + 1] = ((k + 1) * dt, *y)
    return out


@dataclass
class ZeroDynReport:
    beta: float
    v_start: float
    v_end: float
    max_step_increase: float
    monotone: bool
    final_state_norm: float


def swing_energy(beta: float, q1, qd1):
    """V = beta (1 - cos q1) + qd1^2, the monitored swing energy function."""
    return beta * (1.0 - np.cos(q1)) + np.asarray(qd1) ** 2


def zero_dynamics_check(p: RobotParams, traj: np.ndarray) -> ZeroDynReport:
    """Evaluate V along a (t, q1, qd1) trajectory and report its monotonicity."""
    beta = beta_coefficient(p)
    V = swing_energy(beta, traj[:, 1], traj[:, 2])
    steps = np.diff(V)
    max_inc = float(steps.max(initial=0.0))
    return ZeroDynReport(
        beta=beta,
        v_start=float(V[0]),
        v_end=float(V[-1]),
        max_step_increase=max_inc,
        monotone=bool(max_inc <= 1e-8),
        final_state_norm=float(np.hypot(traj[-1, 1], traj[-1, 2])),
    )


# ---------------------------------------------------------------------------
# landing prediction and the impulse (single-brake) controller

def predict_x_land(fs: PlanarFlightState, g: float) -> float:
    """Abscissa where the free parabola meets the ground plane y = 0."""
    disc = fs.yd_e ** 2 + 2.0 * g * fs.y_e
    if disc < 0.0:
        raise NeverLandsError(
            f"no real landing time from y={fs.y_e}, yd={fs.yd_e}")
    t = (fs.yd_e + math.sqrt(disc)) / g
    return fs.x_e + fs.xd_e * t


def braking_time(fs: PlanarFlightState, p_t, g: float,
                 t_now: float = 0.0):
    """Earliest future instant when the free parabola's distance to the
    anchor equals the anchor-to-target distance; None if never."""
    xH, yH = fs.anchor
    p_t = np.asarray(p_t, dtype=float)
    R2 = float((xH - p_t[0]) ** 2 + (yH - p_t[1]) ** 2)
    dx0 = fs.x_e - xH
    dy0 = fs.y_e - yH
    coeffs = np.array([
        g * g / 4.0,
        -g * fs.yd_e,
        fs.xd_e ** 2 + fs.yd_e ** 2 - g * dy0,
        2.0 * (dx0 * fs.xd_e + dy0 * fs.yd_e),
        dx0 ** 2 + dy0 ** 2 - R2,
    ])
    nz = np.flatnonzero(np.abs(coeffs) > 0.0)
    if len(nz) == 0:
        return t_now
    roots = np.roots(coeffs[nz[0]:])
    real = roots[np.abs(roots.imag) < 1e-9].real
    real = real[real >= -1e-9]
    if len(real) == 0:
        return None
    return t_now + max(float(real.min()), 0.0)


@dataclass
class ImpulseController:
    """Free unwinding until the braking instant, then the tether is clamped."""

    m: float
    g: float
    t_b: float | None = None
    radius: float | None = None

    def on_observation(self, fs: PlanarFlightState, obs: TargetObservation,
                       t: float):
        self.radius = float(np.hypot(fs.anchor[0] - obs.x,
                                     fs.anchor[1] - obs.y))
        self.t_b = braking_time(fs, (obs.x, obs.y), self.g, t_now=t)

    def command(self, t: float) -> str:
        if self.t_b is not None and t >= self.t_b:
            return "hold"
        return "release"


# ---------------------------------------------------------------------------
# piecewise-constant visual-feedback controller

# rollout resolution for force planning: the decision only needs the next
# close pass, so a short horizon keeps a replan well under one vision frame
ROLLOUT_DT = 0.008
ROLLOUT_HORIZON = 2.0


@dataclass
class ConstantForceResult:
    u: float
    t_f: float
    miss: float
    converged: bool = True


def _closest_approach_batch(fs: PlanarFlightState, p_t, m: float, g: float,
                            us, dt: float, t_cap: float):
    """Closest approach to p_t along the constant-u flight for a whole batch
    of candidate forces at once, each rollout stopping once it falls below
    the target level."""
    us = np.atleast_1d(np.asarray(us, dtype=float))
    floor = min(0.0, p_t[1]) - 0.05
    ax, ay = fs.anchor
    Y = np.tile(fs.as_array(), (us.size, 1))
    km = us / m
    best_d2 = (Y[:, 0] - p_t[0]) ** 2 + (Y[:, 1] - p_t[1]) ** 2
    best_t = np.zeros(us.size)
    alive = np.ones(us.size, dtype=bool)
    t = 0.0

    def f(Y):
        dx = Y[:, 0] - ax
        dy = Y[:, 1] - ay
        k = km / np.maximum(np.hypot(dx, dy), 1e-12)
        out = np.empty_like(Y)
        out[:, 0] = Y[:, 2]
        out[:, 1] = Y[:, 3]
        out[:, 2] = -k * dx
        out[:, 3] = -g - k * dy
        return out

    while t < t_cap and alive.any():
        k1 = f(Y)
        k2 = f(Y + 0.5 * dt * k1)
        k3 = f(Y + 0.5 * dt * k2)
        k4 = f(Y + dt * k3)
        Y = np.where(alive[:, None],
                     Y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), Y)
        t += dt
        d2 = (Y[:, 0] - p_t[0]) ** 2 + (Y[:, 1] - p_t[1]) ** 2
        better = alive & (d2 < best_d2)
        best_d2[better] = d2[better]
        best_t[better] = t
        alive &= ~((Y[:, 1] < floor) & (Y[:, 3] < 0.0))
    return np.sqrt(best_d2), best_t


def _closest_approach(fs: PlanarFlightState, p_t, m: float, g: float,
                      u: float, dt: float, t_cap: float):
    d, tf = _closest_approach_batch(fs, p_t, m, g, [u], dt, t_cap)
    return float(d[0]), float(tf[0])


def constant_force_opt(fs: PlanarFlightState, p_t, m: float, g: float,
                       u_max: float, warm: float | None = None,
                       dt: float = ROLLOUT_DT, t_cap: float = ROLLOUT_HORIZON,
                       tol_frac: float = 1e-3) -> ConstantForceResult:
    """Best constant tether force on [0, u_max].

    The miss distance is multimodal in u (orbiting passes compete with the
    direct one), so a bare line search lands in the wrong basin; a coarse
    batched scan picks the basin and local grids tighten it.
    """
    p_t = np.asarray(p_t, dtype=float)
    if warm is None:
        lo, hi = 0.0, u_max
        n = 17
    else:
        lo = max(0.0, warm - 0.25 * u_max)
        hi = min(u_max, warm + 0.25 * u_max)
        n = 9
    tol = tol_frac * u_max
    best = None                       # (miss, u, t_f)
    while True:
        us = np.linspace(lo, hi, n)
        ds, tfs = _closest_approach_batch(fs, p_t, m, g, us, dt, t_cap)
        i = int(np.argmin(ds))
        if best is None or ds[i] < best[0]:
            best = (float(ds[i]), float(us[i]), float(tfs[i]))
        width = (hi - lo) / (n - 1)
        if width <= tol:
            break
        lo = max(0.0, best[1] - width)
        hi = min(u_max, best[1] + width)
        n = 9
    return ConstantForceResult(u=best[1], t_f=best[2], miss=best[0])


@dataclass
class ForceSchedule:
    """Piecewise-constant tether force; one segment per replanning epoch."""

    u_max: float
    segments: list = field(default_factory=list)   # (t_start, u)

    def append(self, t_start: float, u: float):
        if self.segments and t_start <= self.segments[-1][0]:
            raise ValueError("segment times must strictly increase")
        if not (0.0 <= u <= self.u_max + 1e-12):
            raise ValueError(f"force {u} outside [0, {self.u_max}]")
        self.segments.append((t_start, min(u, self.u_max)))

    def force_at(self, t: float) -> float:
        u = 0.0
        for ts, useg in self.segments:
            if t >= ts:
                u = useg
            else:
                break
        return u


@dataclass
class LookupTable:
    """Grid of precomputed constant-force solutions used as warm starts."""

    x0: float
    y0: float
    spacing: float
    nx: int
    ny: int
    u_max: float
    u: np.ndarray          # (nx, ny)
    t_f: np.ndarray        # (nx, ny)
    miss: np.ndarray       # (nx, ny)
    reachable: np.ndarray  # (nx, ny) bool

    def query(self, x: float, y: float):
        i = int(np.clip(round((x - self.x0) / self.spacing), 0, self.nx - 1))
        j = int(np.clip(round((y - self.y0) / self.spacing), 0, self.ny - 1))
        return (self.u[i, j], self.t_f[i, j], self.miss[i, j],
                bool(self.reachable[i, j]))


def build_lookup_table(fs0: PlanarFlightState, m: float, g: float,
                       u_max: float, x_range, y_range,
                       spacing: float = 0.05,
                       coarse_n: int = 24,
                       dt: float = ROLLOUT_DT) -> LookupTable:
    """Tabulate constant_force_opt over a target grid, cold-started from a
    coarse force scan per cell; cells that no force brings within one cell
    size are flagged unreachable."""
    xs = np.arange(x_range[0], x_range[1] + 1e-9, spacing)
    ys = np.arange(y_range[0], y_range[1] + 1e-9, spacing)
    nx, ny = len(xs), len(ys)
    U = np.zeros((nx, ny))
    TF = np.zeros((nx, ny))
    MISS = np.zeros((nx, ny))
    scan = np.linspace(0.0, u_max, coarse_n)
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            p_t = (x, y)
            ds, _ = _closest_approach_batch(fs0, p_t, m, g, scan, dt,
                                            ROLLOUT_HORIZON)
            best_u = float(scan[int(np.argmin(ds))])
            res = constant_force_opt(fs0, p_t, m, g, u_max, warm=best_u,
                                     dt=dt)
            U[i, j], TF[i, j], MISS[i, j] = res.u, res.t_f, res.miss
    return LookupTable(x0=float(xs[0]), y0=float(ys[0]), spacing=spacing,
                       nx=nx, ny=ny, u_max=u_max, u=U, t_f=TF, miss=MISS,
                       reachable=MISS <= spacing)


def save_lookup_table(table: LookupTable, path):
    with open(path, "w") as fh:
        fh.write(LUT_FORMAT + "\n")
        fh.write(f"x0 {table.x0!r} spacing {table.spacing!r} nx {table.nx}\n")
        fh.write(f"y0 {table.y0!r} spacing {table.spacing!r} ny {table.ny}\n")
        fh.write(f"u_max {table.u_max!r}\n")
        for i in range(table.nx):
            for j in range(table.ny):
                fh.write(f"{i} {j} {float(table.u[i, j])!r} "
                         f"{float(table.t_f[i, j])!r} "
                         f"{float(table.miss[i, j])!r} "
                         f"{int(table.reachable[i, j])}\n")


def load_lookup_table(path) -> LookupTable:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != LUT_FORMAT:
            raise ValueError(f"unsupported lookup-table format: {header!r}")
        xline = fh.readline().split()
        yline = fh.readline().split()
        uline = fh.readline().split()
        x0, spacing, nx = float(xline[1]), float(xline[3]), int(xline[5])
        y0, ny = float(yline[1]), int(yline[5])
        u_max = float(uline[1])
        U = np.zeros((nx, ny))
        TF = np.zeros((nx, ny))
        MISS = np.zeros((nx, ny))
        R = np.zeros((nx, ny), dtype=bool)
        for line in fh:
            i, j, u, tf, miss, reach = line.split()
            U[int(i), int(j)] = float(u)
            TF[int(i), int(j)] = float(tf)
            MISS[int(i), int(j)] = float(miss)
            R[int(i), int(j)] = bool(int(reach))
    return LookupTable(x0=x0, y0=y0, spacing=spacing, nx=nx, ny=ny,
                       u_max=u_max, u=U, t_f=TF, miss=MISS, reachable=R)


def replan_on_measurement(fs: PlanarFlightState, obs: TargetObservation,
                          table: LookupTable | None,
                          schedule: ForceSchedule, m: float, g: float,
                          dt: float = ROLLOUT_DT) -> ForceSchedule:
    """Append one constant segment starting at the observation time."""
    u_max = schedule.u_max
    if table is not None:
        warm = table.query(obs.x, obs.y)[0]
    elif schedule.segments:
        warm = schedule.segments[-1][1]
    else:
        warm = None
    try:
        res = constant_force_opt(fs, (obs.x, obs.y), m, g, u_max,
                                 warm=warm, dt=dt)
        u_new = res.u
    except Exception:
        # keep flying with the previous force rather than dropping control
        u_new = schedule.segments[-1][1] if schedule.segments else 0.0
    schedule.append(obs.t, u_new)
    return schedule
