"""Dynamic models and kinematic maps of the casting robot.

Planar caster: a driven link (joint q1 actuated by tau1), a free hinge q2
where the tether departs, and the tether length q3 actuated by the cable
force f3 (pull only).  The same module also houses the reduced flight
models used while the end-effector is airborne: the planar point mass on
an unwinding tether, the 1-cable prototype on a line, and the 3D
three-cable caster.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateGeometryError,
    IntegrationDivergedError,
    UnilateralInputError,
)


@dataclass(frozen=True)
class RobotParams:
    """Geometric and inertial constants of the planar caster."""

    x_base: float = 0.0
    y_base: float = 1.695
    a1: float = 0.342      # link-1 pivot-to-hinge length [m]
    l1: float = 0.342      # link-1 gravity moment arm [m]
    m1: float = 1.1105
    m3: float = 0.084      # end-effector mass [kg]
    I1: float = 0.0216
    I3: float = 1.3440e-5
    g: float = 9.81
    q3_nominal: float = 0.495   # nominal tether length [m]

    def __post_init__(self):
        for name in ("a1", "l1", "m1", "m3", "I1", "I3", "g", "q3_nominal"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"RobotParams.{name} must be > 0")


@dataclass
class JointState:
    """Joint positions q = (q1 [rad], q2 [rad], q3 [m]) and rates."""

    q: np.ndarray
    qd: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qd = np.asarray(self.qd, dtype=float)
        if self.q.shape != (3,) or self.qd.shape != (3,):
            raise ValueError("JointState needs 3 positions and 3 rates")
        if self.q[2] < 0.0:
            raise ValueError("tether length q3 must be non-negative")


@dataclass
class DynMatrices:
    B: np.ndarray
    C: np.ndarray
    G: np.ndarray


def mass_matrix(p: RobotParams, q: np.ndarray) -> np.ndarray:
    q1, q2, q3 = q
    c2, s2 = np.cos(q2), np.sin(q2)
    b11 = p.I1 + p.I3 + p.m1 * p.l1 ** 2 + p.m3 * (
        p.a1 ** 2 + q3 ** 2 + 2.0 * p.a1 * q3 * c2)
    b12 = p.I3 + p.m3 * (q3 ** 2 + p.a1 * q3 * c2)
    b13 = p.m3 * p.a1 * s2
    b22 = p.I3 + p.m3 * q3 ** 2
    b23 = 0.0
    b33 = p.m3
    return np.array([[b11, b12, b13],
                     [b12, b22, b23],
                     [b13, b23, b33]])


def _dB_tensor(p: RobotParams, q: np.ndarray) -> np.ndarray:
    """dB/dq_k stacked over k; B depends on q2, q3 only."""
    q1, q2, q3 = q
    c2, s2 = np.cos(q2), np.sin(q2)
    dB = np.zeros((3, 3, 3))
    dB[1][0, 0] = -2.0 * p.m3 * p.a1 * q3 * s2
    dB[1][0, 1] = dB[1][1, 0] = -p.m3 * p.a1 * q3 * s2
    dB[1][0, 2] = dB[1][2, 0] = p.m3 * p.a1 * c2
    dB[2][0, 0] = p.m3 * (2.0 * q3 + 2.0 * p.a1 * c2)
    dB[2][0, 1] = dB[2][1, 0] = p.m3 * (2.0 * q3 + p.a1 * c2)
    dB[2][1, 1] = 2.0 * p.m3 * q3
    return dB


def coriolis_matrix(p: RobotParams, q: np.ndarray, qd: np.ndarray) -> np.ndarray:
    """Coriolis matrix from the Christoffel symbols of the inertia matrix.

    This form satisfies the skew-symmetry of Bdot - 2C exactly, which the
    energy bookkeeping of the simulator relies on.
    """
    dB = _dB_tensor(p, q)
    # c_ij = sum_k 0.5 (dB_ij/dq_k + dB_ik/dq_j - dB_jk/dq_i) qd_k
    C = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += 0.5 * (dB[k][i, j] + dB[j][i, k] - dB[i][j, k]) * qd[k]
            C[i, j] = acc
    return C


def coriolis_printed(p: RobotParams, q: np.ndarray, qd: np.ndarray) -> np.ndarray:
    """Legacy closed-form Coriolis matrix kept as a report-path cross-check.

    One entry (row 3, col 2) disagrees with the Christoffel derivation; the
    simulator never uses this form.
    """
    q1, q2, q3 = q
    qd1, qd2, qd3 = qd
    c2, s2 = np.cos(q2), np.sin(q2)
    m3, a1 = p.m3, p.a1
    c11 = -m3 * a1 * q3 * s2 * qd2 + m3 * (a1 * c2 + q3) * qd3
    c12 = -m3 * a1 * q3 * s2 * (qd1 + qd2) + m3 * (a1 * c2 + q3) * qd3
    c13 = m3 * (a1 * c2 + q3) * (qd1 + qd2)
    c21 = m3 * a1 * q3 * s2 * qd1 + m3 * q3 * qd3
    c22 = m3 * q3 * qd3
    c23 = m3 * q3 * (qd1 + qd2)
    c31 = -m3 * (a1 * c2 + q3) * qd1 - m3 * q3 * qd2
    c32 = -m3 * q3 * (qd2 + qd3)
    return np.array([[c11, c12, c13],
                     [c21, c22, c23],
                     [c31, c32, 0.0]])


def gravity_vector(p: RobotParams, q: np.ndarray) -> np.ndarray:
    q1, q2, q3 = q
    s1 = np.sin(q1)
    s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
    g1 = p.m1 * p.g * p.l1 * s1 + p.m3 * p.g * (p.a1 * s1 + q3 * s12)
    g2 = p.m3 * p.g * q3 * s12
    g3 = -p.m3 * p.g * c12
    return np.array([g1, g2, g3])


def eval_dynamics_matrices(p: RobotParams, state: JointState) -> DynMatrices:
    return DynMatrices(B=mass_matrix(p, state.q),
                       C=coriolis_matrix(p, state.q, state.qd),
                       G=gravity_vector(p, state.q))


def potential_energy(p: RobotParams, q: np.ndarray) -> float:
    """Potential of link-1 COM plus end-effector mass (for energy audits)."""
    q1, q2, q3 = q
    y_com1 = p.y_base - p.l1 * np.cos(q1)
    y_ee = p.y_base - p.a1 * np.cos(q1) - q3 * np.cos(q1 + q2)
    return p.m1 * p.g * y_com1 + p.m3 * p.g * y_ee


def forward_kinematics(p: RobotParams, state: JointState):
    """End-effector pose (x_e, y_e, phi_e); angles measured from hanging down."""
    q1, q2, q3 = state.q
    s1, c1 = np.sin(q1), np.cos(q1)
    s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
    x_e = p.x_base + p.a1 * s1 + q3 * s12
    y_e = p.y_base - p.a1 * c1 - q3 * c12
    phi_e = q1 + q2 + np.pi / 2.0
    return x_e, y_e, phi_e


def link_tip(p: RobotParams, q1: float):
    """World position of the tether departure point (tip of link 1)."""
    return (p.x_base + p.a1 * np.sin(q1), p.y_base - p.a1 * np.cos(q1))


def jacobian(p: RobotParams, state: JointState) -> np.ndarray:
    q1, q2, q3 = state.q
    s1, c1 = np.sin(q1), np.cos(q1)
    s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
    return np.array([
        [p.a1 * c1 + q3 * c12, q3 * c12, s12],
        [p.a1 * s1 + q3 * s12, q3 * s12, -c12],
        [1.0, 1.0, 0.0],
    ])


def planar_joint_accel(p: RobotParams, state: JointState,
                       tau1: float, f3: float) -> np.ndarray:
    """Joint accelerations under (tau1, 0, -f3); the cable can only pull."""
    if f3 < 0.0:
        raise UnilateralInputError(f"cable force f3 = {f3} < 0")
    B = mass_matrix(p, state.q)
    C = coriolis_matrix(p, state.q, state.qd)
    G = gravity_vector(p, state.q)
    tau = np.array([tau1, 0.0, -f3])
    return np.linalg.solve(B, tau - C @ state.qd - G)


# ---------------------------------------------------------------------------
# planar flight (point mass on an unwinding tether)

@dataclass
class PlanarFlightState:
    x_e: float
    y_e: float
    xd_e: float
    yd_e: float
    anchor: tuple = (0.0, 0.0)   # tether departure point (x_L, y_L)

    def as_array(self) -> np.ndarray:
        return np.array([self.x_e, self.y_e, self.xd_e, self.yd_e])


def flight_accel_planar(fs: PlanarFlightState, m: float, g: float,
                        u: float) -> np.ndarray:
    """Gravity plus a pull of magnitude u/m toward the anchor."""
    if u < 0.0:
        raise UnilateralInputError(f"tether force u = {u} < 0")
    dx = fs.x_e - fs.anchor[0]
    dy = fs.y_e - fs.anchor[1]
    r = np.hypot(dx, dy)
    if r < 1e-12:
        raise DegenerateGeometryError("end-effector coincides with the anchor")
    return np.array([-(u / m) * dx / r, -g - (u / m) * dy / r])


def one_cable_accel(m: float, x: float, u: float) -> float:
    """Line prototype: the cable always pulls toward the origin; sign(0) = 0."""
    if u < 0.0:
        raise UnilateralInputError(f"cable force u = {u} < 0")
    return -np.sign(x) * u / m


# ---------------------------------------------------------------------------
# 3D three-cable caster

@dataclass(frozen=True)
class Caster3DGeometry:
    b: float = 1.0           # platform arm length [m]
    r: float = 1.0           # throw radius [m]
    m: float = 1.0           # end-effector mass [kg]
    I_platform: float = 1.0  # recorded, unused (platform frozen after throw)
    g: float = 0.0
    u_max: float = 10.0

    def __post_init__(self):
        if self.b <= 0 or self.r <= 0 or self.m <= 0 or self.u_max <= 0:
            raise ValueError("b, r, m, u_max must be > 0")


@dataclass
class Flight3DState:
    p_e: np.ndarray
    v_e: np.ndarray

    def __post_init__(self):
        self.p_e = np.asarray(self.p_e, dtype=float)
        self.v_e = np.asarray(self.v_e, dtype=float)

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.p_e, self.v_e])


def anchor_points_3d(geom: Caster3DGeometry, alpha: float) -> np.ndarray:
    """Rows are the three cable anchors; platform plane z = 0, throw plane above."""
    ca, sa = np.cos(alpha), np.sin(alpha)
    k = geom.b * np.sqrt(3.0) / 3.0
    return np.array([[-geom.b * ca, -geom.b * sa, -k],
                     [geom.b * ca, geom.b * sa, -k],
                     [0.0, 0.0, -2.0 * k]])


def cable_matrix_3d(geom: Caster3DGeometry, p_e: np.ndarray,
                    alpha: float) -> np.ndarray:
    """Column i: unit vector from anchor i to the end-effector."""
    A = anchor_points_3d(geom, alpha)
    d = np.asarray(p_e, dtype=float)[None, :] - A
    n = np.linalg.norm(d, axis=1)
    if np.any(n < 1e-12):
        raise DegenerateGeometryError("end-effector coincides with an anchor")
    return (d / n[:, None]).T


def flight_accel_3d(geom: Caster3DGeometry, fs: Flight3DState, alpha: float,
                    u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if np.any(u < 0.0):
        raise UnilateralInputError(f"cable forces must be >= 0, got {u}")
    Gam = cable_matrix_3d(geom, fs.p_e, alpha)
    return np.array([0.0, 0.0, -geom.g]) - (Gam @ u) / geom.m


def throw_state_3d(geom: Caster3DGeometry, alpha0: float,
                   omega0: float) -> Flight3DState:
    """State of the end-effector at release from the spinning platform."""
    s, c = np.sin(alpha0), np.cos(alpha0)
    return Flight3DState(
        p_e=np.array([-geom.r * s, geom.r * c, 0.0]),
        v_e=np.array([geom.r * omega0 * c, geom.r * omega0 * s, 0.0]))


# ---------------------------------------------------------------------------
# integrator

def integrate_step(f, y: np.ndarray, dt: float) -> np.ndarray:
    """One classical RK4 step of y' = f(y); fixed step keeps runs bit-identical."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    out = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationDivergedError("state became non-finite")
    return out
