"""Microrobot equation of motion and its closed-form integrator.

A dense spherical microrobot in creeping flow relaxes exponentially toward
the local fluid velocity (linear drag, relaxation time tau_p) while being
driven by reduced gravity and the magnetic gradient force.  With the fluid
velocity frozen over a step, both the velocity and position updates have
closed forms, which is what the trajectory loop iterates.  The adaptive step
keeps the path increment near 10 um; wall contact is handled by bisecting to
the one-radius offset surface and reflecting the normal velocity component.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BifurcationGeometry, wall_distance

G_STANDARD = 9.81           # m/s^2
STEP_LENGTH = 1.0e-5        # m of relative path per time step
FALLBACK_SPEED = 1.0e-3     # m/s used when particle and fluid are both at rest
RHO_ROBOT = 5200.0          # kg/m^3, magnetite-like
M_SAT = 5.0e5               # A/m saturation magnetization
COLLISION_TOL = 1.0e-9      # m, bisection resolution for wall crossings


def gravity_vector(enabled: bool = True, g: float = G_STANDARD) -> np.ndarray:
    """Gravity along -z (out of the bifurcation plane); zero when disabled."""
    return np.array([0.0, 0.0, -g if enabled else 0.0])


def load_magnetization_curve(path) -> tuple[np.ndarray, np.ndarray]:
    """Two-column CSV (field magnitude T, magnetization A/m), sorted by field.

    Interpolated linearly and clamped at both ends when queried.
    """
    rows = np.loadtxt(path, delimiter=",", ndmin=2)
    if rows.shape[1] != 2 or rows.shape[0] < 2:
        raise ValueError(f"magnetization table {path} needs >= 2 rows of "
                         "'B_T, M_A_per_m'")
    order = np.argsort(rows[:, 0])
    b, m = rows[order, 0], rows[order, 1]
    if (m < 0.0).any():
        raise ValueError("magnetization values must be non-negative")
    if (np.diff(m) < 0.0).any():
        raise ValueError("magnetization must be non-decreasing with field")
    return b, m


@dataclass(frozen=True)
class Microrobot:
    """Spherical magnetic microrobot.

    ``magnetization_curve`` (optional) maps |B| in tesla to A/m; without it
    the robot is taken at saturation, which yields the minimum gradient for a
    given force.
    """

    d_p: float
    rho_p: float = RHO_ROBOT
    m_s: float = M_SAT
    magnetization_curve: tuple | None = None

    def __post_init__(self):
        if not self.d_p > 0.0:
            raise ValueError(f"diameter must be positive, got {self.d_p}")
        if not self.rho_p > 0.0:
            raise ValueError(f"density must be positive, got {self.rho_p}")

    @property
    def radius(self) -> float:
        return 0.5 * self.d_p

    @property
    def volume(self) -> float:
        return math.pi * self.d_p ** 3 / 6.0

    @property
    def mass(self) -> float:
        return self.rho_p * self.volume

    def magnetization(self, field_magnitude: float | None = None) -> float:
        """Active magnetization (A/m); curve mode needs a field magnitude."""
        if self.magnetization_curve is None:
            return self.m_s
        if field_magnitude is None:
            raise ValueError("a field magnitude is required to evaluate a "
                             "magnetization lookup table")
        b, m = self.magnetization_curve
        return float(np.interp(field_magnitude, b, m))


@dataclass
class ParticleState:
    """Instantaneous microrobot state along a trajectory."""

    position: np.ndarray
    velocity: np.ndarray
    time: float = 0.0
    collision_count: int = 0
    region_samples: list = field(default_factory=list)


def relaxation_time(robot: Microrobot, eta_local: float) -> float:
    """Velocity relaxation time under Stokes drag: rho_p d_p^2 / (18 eta)."""
    if not eta_local > 0.0:
        raise ValueError(f"viscosity must be positive, got {eta_local}")
    return robot.rho_p * robot.d_p ** 2 / (18.0 * eta_local)


def drive_acceleration(grad_b, robot: Microrobot, rho_f: float,
                       gravity=None, magnetization: float | None = None) -> np.ndarray:
    """Net non-drag acceleration: reduced gravity plus magnetic drive.

    a = g (rho_p - rho_f)/rho_p + grad_b * M / rho_p
    """
    g = gravity if gravity is not None else gravity_vector()
    m_eff = magnetization if magnetization is not None else robot.magnetization()
    return (np.asarray(g, dtype=float) * (robot.rho_p - rho_f) / robot.rho_p
            + np.asarray(grad_b, dtype=float) * (m_eff / robot.rho_p))


def _exp_step(x, y, z, upx, upy, upz, ufx, ufy, ufz, tau, ax, ay, az, dt):
    """One closed-form step of the drag/drive ODE with frozen fluid velocity.

    Returns the new position and velocity components.
    """
    e = math.exp(-dt / tau)
    om = 1.0 - e
    tom = tau * om
    # velocity: relax toward u_f + tau*a
    nux = ufx + e * (upx - ufx) + tom * ax
    nuy = ufy + e * (upy - ufy) + tom * ay
    nuz = ufz + e * (upz - ufz) + tom * az
    # position: drift with u_f + tau*a plus the decaying velocity excess
    nx = x + dt * (ufx + tau * ax) + tom * (upx - ufx - tau * ax)
    ny = y + dt * (ufy + tau * ay) + tom * (upy - ufy - tau * ay)
    nz = z + dt * (ufz + tau * az) + tom * (upz - ufz - tau * az)
    return nx, ny, nz, nux, nuy, nuz


def step_velocity(u_p, u_f, tau_p: float, grad_b, robot: Microrobot,
                  dt: float, *, rho_f: float, gravity=None,
                  magnetization: float | None = None) -> np.ndarray:
    """Closed-form velocity update over dt (frozen fluid velocity)."""
    if dt < 0.0:
        raise ValueError(f"time step must be non-negative, got {dt}")
    a = drive_acceleration(grad_b, robot, rho_f, gravity, magnetization)
    out = _exp_step(0.0, 0.0, 0.0,
                    float(u_p[0]), float(u_p[1]), float(u_p[2]),
                    float(u_f[0]), float(u_f[1]), float(u_f[2]),
                    tau_p, a[0], a[1], a[2], dt)
    return np.array(out[3:])


def step_position(position, u_p, u_f, tau_p: float, grad_b,
                  robot: Microrobot, dt: float, *, rho_f: float,
                  gravity=None, magnetization: float | None = None) -> np.ndarray:
    """Closed-form position update over dt (frozen fluid velocity)."""
    if dt < 0.0:
        raise ValueError(f"time step must be non-negative, got {dt}")
    a = drive_acceleration(grad_b, robot, rho_f, gravity, magnetization)
    out = _exp_step(float(position[0]), float(position[1]), float(position[2]),
                    float(u_p[0]), float(u_p[1]), float(u_p[2]),
                    float(u_f[0]), float(u_f[1]), float(u_f[2]),
                    tau_p, a[0], a[1], a[2], dt)
    return np.array(out[:3])


def time_step(speed_p: float, speed_f: float) -> float:
    """Adaptive step: 10 um of relative path, dt = 1e-5 / (|u_p| + |u_f|).

    Falls back to the dt of 10 um at 1 mm/s when both speeds vanish.
    """
    total = speed_p + speed_f
    if total <= 0.0:
        return STEP_LENGTH / FALLBACK_SPEED
    return STEP_LENGTH / total


def reflect_velocity(velocity, normal, cor: float = 1.0) -> np.ndarray:
    """Reflect the into-wall normal component, scaled by the restitution
    coefficient; the tangential component is untouched."""
    v = np.asarray(velocity, dtype=float)
    n = np.asarray(normal, dtype=float)
    vn = float(v @ n)
    if vn >= 0.0:
        return v.copy()
    return v - (1.0 + cor) * vn * n


def resolve_collision(state_before: ParticleState, state_after: ParticleState,
                      geometry: BifurcationGeometry, r_p: float,
                      cor: float = 1.0) -> ParticleState:
    """Project a wall-crossing step back onto the one-radius offset surface.

    Bisects the segment between the two positions for the point where the
    wall clearance equals r_p, reflects the normal velocity component there
    (scaled by ``cor``), and increments the collision count.
    """
    p0 = np.asarray(state_before.position, dtype=float)
    p1 = np.asarray(state_after.position, dtype=float)
    qx, qy, qz, nx, ny, nz = _collide_scalar(
        geometry, r_p, p0[0], p0[1], p0[2], p1[0], p1[1], p1[2])
    v = reflect_velocity(state_after.velocity, (nx, ny, nz), cor)
    return ParticleState(position=np.array([qx, qy, qz]), velocity=v,
                         time=state_after.time,
                         collision_count=state_after.collision_count + 1,
                         region_samples=state_after.region_samples)


def _collide_scalar(geometry, r_p, x0, y0, z0, x1, y1, z1):
    """Bisect [p0, p1] to the offset-surface crossing; return point+normal."""
    from .geometry import _wall_scalar
    R1 = geometry.r_main
    L = geometry.l_main
    R2p = geometry.r_branch_desired
    R2m = geometry.r_branch_other
    ca = math.cos(geometry.branch_half_angle)
    sa = math.sin(geometry.branch_half_angle)
    seg = math.sqrt((x1 - x0) ** 2 + (y1 - y0) ** 2 + (z1 - z0) ** 2)
    lo, hi = 0.0, 1.0
    if seg > 0.0:
        steps = max(1, math.ceil(math.log2(seg / COLLISION_TOL)))
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            mx = x0 + mid * (x1 - x0)
            my = y0 + mid * (y1 - y0)
            mz = z0 + mid * (z1 - z0)
            d, _, _, _ = _wall_scalar(R1, L, R2p, R2m, ca, sa, mx, my, mz)
            if d >= r_p:
                lo = mid
            else:
                hi = mid
    qx = x0 + lo * (x1 - x0)
    qy = y0 + lo * (y1 - y0)
    qz = z0 + lo * (z1 - z0)
    _, nx, ny, nz = _wall_scalar(R1, L, R2p, R2m, ca, sa, qx, qy, qz)
    return qx, qy, qz, nx, ny, nz


def settling_velocity(robot: Microrobot, rho_f: float, eta: float,
                      g: float = G_STANDARD) -> float:
    """Terminal speed in still fluid with no applied gradient:
    v_t = tau_p * g * (rho_p - rho_f) / rho_p."""
    if not (rho_f > 0.0 and eta > 0.0 and g >= 0.0):
        raise ValueError("fluid density, viscosity and g must be positive")
    return relaxation_time(robot, eta) * g * (robot.rho_p - rho_f) / robot.rho_p
