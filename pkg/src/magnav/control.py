"""Gradient control and the trajectory integration loop.

Two controller modes steer the microrobot toward the waypoint sequence
(upstream target -> downstream target -> outlet):

* dynamic: each step inverts the closed-form position update to find the
  gradient that would land the robot exactly on its current waypoint in the
  time the local blood flow needs to cover that distance;
* constant: a fixed magnitude per region G1/G2/G3, pointed laterally toward
  the desired branch (+y), optionally with the vertical component that holds
  the robot against gravity.

``run_trajectory`` integrates a single robot from a release position to an
outlet, enforcing the one-radius wall constraint and recording per-region
gradient statistics.
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (BifurcationGeometry, TargetPlan, _arc_scalar,
                       _wall_scalar, entrance_positions)
from .hemodynamics import FlowField, CarreauModel, apparent_viscosity
from .dynamics import (FALLBACK_SPEED, G_STANDARD, Microrobot, _collide_scalar,
                       _exp_step, gravity_vector, relaxation_time, time_step)

OUTCOME_DESIRED = "desired"
OUTCOME_OTHER = "other"
OUTCOME_STALLED = "stalled"

MAX_STEPS = 1_000_000


@dataclass(frozen=True)
class GradientCommand:
    """A commanded magnetic field gradient, with its spherical decomposition:
    azimuth in the bifurcation plane (atan2(gy, gx)), polar from +z."""

    vector: np.ndarray
    magnitude: float
    azimuthal_angle: float
    polar_angle: float

    @classmethod
    def from_vector(cls, vector) -> "GradientCommand":
        v = np.asarray(vector, dtype=float)
        mag = float(np.linalg.norm(v))
        if mag == 0.0:
            return cls(v, 0.0, 0.0, 0.0)
        az = math.atan2(v[1], v[0])
        polar = math.atan2(math.hypot(v[0], v[1]), v[2])
        return cls(v, mag, az, polar)

    @classmethod
    def zero(cls) -> "GradientCommand":
        return cls(np.zeros(3), 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class DynamicMode:
    """Recompute the required gradient every step."""

    gradient_cap: float | None = None


@dataclass(frozen=True)
class ConstantMode:
    """Fixed per-region gradient magnitudes, +y azimuth, in-plane polar.

    With ``gravity_compensation`` the vertical hold component is added on top
    of the configured lateral magnitude (which stays as configured).
    """

    g1: float
    g2: float
    g3: float
    gravity_compensation: bool = True
    gradient_cap: float | None = None

    def __post_init__(self):
        for name in ("g1", "g2", "g3"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")

    def region_magnitude(self, region: int) -> float:
        return (self.g1, self.g2, self.g3)[region - 1]


def magnetic_force(robot: Microrobot, grad_b,
                   field_magnitude: float | None = None) -> np.ndarray:
    """Force on the robot: volume * magnetization * gradient (linear)."""
    m_eff = robot.magnetization(field_magnitude)
    return robot.volume * m_eff * np.asarray(grad_b, dtype=float)


def gravity_hold_gradient(robot: Microrobot, rho_f: float,
                          g: float = G_STANDARD,
                          magnetization: float | None = None) -> float:
    """Vertical gradient that holds a stationary robot against gravity.

    Equilibrium of the force balance in still fluid: the magnetic drive
    cancels the buoyancy-reduced weight, giving g*(rho_p - rho_f)/M along +z.
    Independent of diameter (both terms scale with volume).
    """
    m_eff = magnetization if magnetization is not None else robot.magnetization()
    return g * (robot.rho_p - rho_f) / m_eff


def _required_grad_scalar(dx, dy, dz, upx, upy, upz, ufx, ufy, ufz,
                          tau, gx, gy, gz, buoy, inv_vm, fallback_speed):
    """Invert the position update for the gradient landing on the target.

    d is the vector to the target; the flight time is the drag-only estimate
    |d| / |u_f|.  ``buoy`` is (rho_p-rho_f)/rho_p, ``inv_vm`` is rho_p/M.
    Returns the gradient components.
    """
    dn = math.sqrt(dx * dx + dy * dy + dz * dz)
    if dn == 0.0:
        return 0.0, 0.0, 0.0
    ufn = math.sqrt(ufx * ufx + ufy * ufy + ufz * ufz)
    speed = ufn if ufn > 0.0 else fallback_speed
    t = dn / speed
    e = math.exp(-t / tau)
    core = t - tau + tau * e            # > 0 for all t > 0
    denom = tau * core / inv_vm         # tau * core * (M / rho_p)
    gterm = tau * buoy * (tau - t - tau * e)
    nx = dx - ufx * t - upx * tau + ufx * tau + tau * e * (upx - ufx) + gx * gterm
    ny = dy - ufy * t - upy * tau + ufy * tau + tau * e * (upy - ufy) + gy * gterm
    nz = dz - ufz * t - upz * tau + ufz * tau + tau * e * (upz - ufz) + gz * gterm
    return nx / denom, ny / denom, nz / denom


def required_gradient(position, velocity, u_f, tau_p: float,
                      robot: Microrobot, target, *, rho_f: float,
                      gravity=None, magnetization: float | None = None,
                      fallback_speed: float = FALLBACK_SPEED,
                      gradient_cap: float | None = None) -> GradientCommand:
    """Gradient that lands the robot on ``target`` under frozen-flow drag.

    Self-consistent with the position update: stepping with the returned
    gradient over the estimated flight time reproduces the target.
    """
    g = gravity if gravity is not None else gravity_vector()
    m_eff = magnetization if magnetization is not None else robot.magnetization()
    comps = _required_grad_scalar(
        float(target[0]) - float(position[0]),
        float(target[1]) - float(position[1]),
        float(target[2]) - float(position[2]),
        float(velocity[0]), float(velocity[1]), float(velocity[2]),
        float(u_f[0]), float(u_f[1]), float(u_f[2]),
        tau_p, float(g[0]), float(g[1]), float(g[2]),
        (robot.rho_p - rho_f) / robot.rho_p, robot.rho_p / m_eff,
        fallback_speed)
    vec = np.array(comps)
    if gradient_cap is not None:
        mag = float(np.linalg.norm(vec))
        if mag > gradient_cap:
            vec *= gradient_cap / mag
    return GradientCommand.from_vector(vec)


def next_waypoint(region: int, plan: TargetPlan) -> np.ndarray:
    """Waypoint for the current region: upstream target in G1, downstream
    target in G2, the outlet centre in G3."""
    if region == 1:
        return plan.upstream_point
    if region == 2:
        return plan.downstream_point
    return plan.final_point


def constant_gradient(region: int, mode: ConstantMode, robot: Microrobot,
                      *, rho_f: float, gravity_on: bool = True,
                      g: float = G_STANDARD,
                      magnetization: float | None = None) -> GradientCommand:
    """Per-region constant command: lateral +y magnitude, optional vertical
    hold component when gravity is active."""
    lateral = mode.region_magnitude(region)
    gz = 0.0
    if mode.gravity_compensation and gravity_on:
        gz = gravity_hold_gradient(robot, rho_f, g=g,
                                   magnetization=magnetization)
    return GradientCommand.from_vector((0.0, lateral, gz))


@dataclass(frozen=True)
class RegionStats:
    """Gradient statistics accumulated over one region of one trajectory."""

    n: int
    mean: float
    median: float
    max: float
    angle: float  # azimuth of the region's mean in-plane gradient, rad


@dataclass
class TrajectoryRecord:
    """Outcome and statistics of one navigation run."""

    outcome: str
    collision_count: int
    transit_time: float
    steps: int
    wall_margin_min: float
    region_stats: dict
    final_position: np.ndarray
    final_velocity: np.ndarray
    path: list | None = None


def _finalize_regions(mags, sums):
    stats = {}
    for region in (1, 2, 3):
        m = mags[region - 1]
        if not m:
            continue
        arr = np.asarray(m)
        sx, sy = sums[region - 1]
        stats[region] = RegionStats(
            n=arr.size, mean=float(arr.mean()),
            median=float(np.median(arr)), max=float(arr.max()),
            angle=math.atan2(sy, sx) if (sx != 0.0 or sy != 0.0) else 0.0)
    return stats


def run_trajectory(geometry: BifurcationGeometry, flow: FlowField,
                   robot: Microrobot, plan: TargetPlan, mode,
                   *, entrance_index: int | None = None,
                   start_position=None, cor: float = 1.0,
                   gravity: bool = True, g: float = G_STANDARD,
                   tau_viscosity: str = "carreau",
                   carreau: CarreauModel | None = None,
                   field_magnitude: float | None = None,
                   max_steps: int = MAX_STEPS,
                   record_path: bool = False) -> TrajectoryRecord:
    """Integrate one robot from its release position to an outlet.

    The robot is released moving with the local blood velocity.  Each step:
    adaptive dt, controller command, closed-form velocity/position update,
    wall-constraint enforcement (bisect + reflect, restitution ``cor``),
    region-tagged gradient sampling.  Terminates at either branch outlet
    plane or, failing that, after ``max_steps`` (outcome "stalled").
    """
    if (entrance_index is None) == (start_position is None):
        raise ValueError("give exactly one of entrance_index/start_position")
    r_p = robot.radius
    if start_position is None:
        if not 1 <= entrance_index <= 5:
            raise ValueError(f"entrance index must be 1..5, got {entrance_index}")
        start_position = entrance_positions(geometry, r_p)[entrance_index - 1]

    if carreau is None:
        carreau = getattr(flow, "carreau", None) or CarreauModel()
    if tau_viscosity == "carreau":
        eta_fixed = None
    elif tau_viscosity == "eta_inf":
        eta_fixed = carreau.eta_inf
    elif tau_viscosity == "eta_0":
        eta_fixed = carreau.eta_0
    else:
        raise ValueError(f"unknown tau_viscosity setting {tau_viscosity!r}")

    m_eff = robot.magnetization(field_magnitude)
    rho_p = robot.rho_p
    rho_f = flow.rho_f
    buoy = (rho_p - rho_f) / rho_p
    inv_vm = rho_p / m_eff
    m_over_rho = m_eff / rho_p
    gvx, gvy, gvz = gravity_vector(gravity, g)
    dynamic = isinstance(mode, DynamicMode)
    if not dynamic and not isinstance(mode, ConstantMode):
        raise TypeError(f"mode must be DynamicMode or ConstantMode, got {mode!r}")
    cap = mode.gradient_cap
    if dynamic:
        const_g = None
    else:
        hold = (gravity_hold_gradient(robot, rho_f, g=g, magnetization=m_eff)
                if (mode.gravity_compensation and gravity) else 0.0)
        const_g = ((0.0, mode.g1, hold), (0.0, mode.g2, hold),
                   (0.0, mode.g3, hold))

    # geometry scalars for the hot loop
    R1 = geometry.r_main
    L = geometry.l_main
    R2p = geometry.r_branch_desired
    R2m = geometry.r_branch_other
    ca = math.cos(geometry.branch_half_angle)
    sa = math.sin(geometry.branch_half_angle)
    l_branch = geometry.l_branch
    up_station = plan.upstream_station
    down_station = plan.downstream_station
    tx1, ty1, tz1 = (float(v) for v in plan.upstream_point)
    tx2, ty2, tz2 = (float(v) for v in plan.downstream_point)
    tx3, ty3, tz3 = (float(v) for v in plan.final_point)
    targets = ((tx1, ty1, tz1), (tx2, ty2, tz2), (tx3, ty3, tz3))
    eval_flow = flow._eval

    x, y, z = (float(start_position[0]), float(start_position[1]),
               float(start_position[2]))
    ufx, ufy, ufz, gam = eval_flow(x, y, z)
    upx, upy, upz = ufx, ufy, ufz   # released moving with the blood
    t = 0.0
    collisions = 0
    wall_margin_min = math.inf
    mags = ([], [], [])
    sums = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]
    path = [] if record_path else None
    outcome = OUTCOME_STALLED
    steps = 0

    for steps in range(1, max_steps + 1):
        ufx, ufy, ufz, gam = eval_flow(x, y, z)
        if eta_fixed is None:
            xg = carreau.lam * gam
            eta = (carreau.eta_inf + (carreau.eta_0 - carreau.eta_inf)
                   * (1.0 + xg * xg) ** (0.5 * (carreau.n - 1.0)))
        else:
            eta = eta_fixed
        tau = rho_p * robot.d_p * robot.d_p / (18.0 * eta)
        sp = math.sqrt(upx * upx + upy * upy + upz * upz)
        sf = math.sqrt(ufx * ufx + ufy * ufy + ufz * ufz)
        dt = time_step(sp, sf)

        # region of the current position drives waypoint and sampling
        arc = _arc_scalar(L, ca, sa, x, y)
        region = 1 if arc < up_station else (2 if arc < down_station else 3)
        if dynamic:
            txx, tyy, tzz = targets[region - 1]
            bx, by, bz = _required_grad_scalar(
                txx - x, tyy - y, tzz - z, upx, upy, upz, ufx, ufy, ufz,
                tau, gvx, gvy, gvz, buoy, inv_vm,
                sp if sp > 0.0 else FALLBACK_SPEED)
            if cap is not None:
                bn = math.sqrt(bx * bx + by * by + bz * bz)
                if bn > cap:
                    k = cap / bn
                    bx, by, bz = bx * k, by * k, bz * k
        else:
            bx, by, bz = const_g[region - 1]
        bmag = math.sqrt(bx * bx + by * by + bz * bz)
        ml = mags[region - 1]
        ml.append(bmag)
        sr = sums[region - 1]
        sr[0] += bx
        sr[1] += by

        ax = gvx * buoy + bx * m_over_rho
        ay = gvy * buoy + by * m_over_rho
        az = gvz * buoy + bz * m_over_rho
        nx, ny, nz, nux, nuy, nuz = _exp_step(
            x, y, z, upx, upy, upz, ufx, ufy, ufz, tau, ax, ay, az, dt)

        collided = False
        d, _, _, _ = _wall_scalar(R1, L, R2p, R2m, ca, sa, nx, ny, nz)
        margin = d - r_p
        if margin < -1e-12:
            qx, qy, qz, wnx, wny, wnz = _collide_scalar(
                geometry, r_p, x, y, z, nx, ny, nz)
            vn = nux * wnx + nuy * wny + nuz * wnz
            if vn < 0.0:
                k = (1.0 + cor) * vn
                nux -= k * wnx
                nuy -= k * wny
                nuz -= k * wnz
            nx, ny, nz = qx, qy, qz
            collisions += 1
            collided = True
            d2, _, _, _ = _wall_scalar(R1, L, R2p, R2m, ca, sa, nx, ny, nz)
            margin = d2 - r_p
        if margin < wall_margin_min:
            wall_margin_min = margin

        x, y, z = nx, ny, nz
        upx, upy, upz = nux, nuy, nuz
        t += dt
        if path is not None:
            path.append((t, x, y, z, upx, upy, upz, bx, by, bz, region,
                         int(collided)))

        # outlet planes, one branch-length along either branch axis
        sd = (x - L) * ca + y * sa
        so = (x - L) * ca - y * sa
        if sd >= l_branch:
            outcome = OUTCOME_DESIRED
            break
        if so >= l_branch:
            outcome = OUTCOME_OTHER
            break

    return TrajectoryRecord(
        outcome=outcome, collision_count=collisions, transit_time=t,
        steps=steps, wall_margin_min=wall_margin_min,
        region_stats=_finalize_regions(mags, sums),
        final_position=np.array([x, y, z]),
        final_velocity=np.array([upx, upy, upz]), path=path)
