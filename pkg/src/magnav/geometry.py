"""Idealized planar Y-bifurcation geometry.

A straight main vessel of diameter ``d_main`` runs along +x from the inlet
(x = 0) to the flow-split plane (x = l_main).  Two straight branches of
length ``l_branch`` open from the split point, each at ``branch_half_angle``
from the x axis; the branch toward +y is the navigation target ("desired"
branch).  Everything lives in SI units (metres, radians).

The module answers the geometric questions the simulator needs: branch
sizing, release positions across the inlet, waypoint placement, region
classification along the centerline, and distance-to-wall queries with
inward normals for the one-radius wall constraint.
"""

import math
from dataclasses import dataclass

import numpy as np

# Named presets: (d_main, d_branch, l_main) in mm.  The "+0.2" variants widen
# every diameter by 0.2 mm (lengths unchanged) for robustness studies.
ARTERY_PRESETS = {
    "ACA": (2.00, 1.59, 20.0),
    "MCA": (2.40, 1.90, 30.0),
    "PCA": (1.80, 1.27, 10.0),
    "ACA+0.2": (2.20, 1.79, 20.0),
    "MCA+0.2": (2.60, 2.10, 30.0),
    "PCA+0.2": (2.00, 1.47, 10.0),
}

DEFAULT_HALF_ANGLE = math.radians(45.0)


def murray_branch_diameter(d_main: float) -> float:
    """Branch diameter for a symmetric split that conserves cubed diameters.

    For equal daughters, d_main^3 = 2 * d_branch^3, i.e. the branches are a
    factor 2^(-1/3) narrower than the parent.
    """
    if not d_main > 0.0 or not math.isfinite(d_main):
        raise ValueError(f"main diameter must be positive, got {d_main}")
    return d_main * 2.0 ** (-1.0 / 3.0)


@dataclass(frozen=True)
class BifurcationGeometry:
    """Planar symmetric Y-bifurcation, immutable after construction."""

    d_main: float
    d_branch_desired: float
    d_branch_other: float
    l_main: float
    branch_half_angle: float
    l_branch: float

    def __post_init__(self):
        for name in ("d_main", "d_branch_desired", "d_branch_other",
                     "l_main", "l_branch"):
            v = getattr(self, name)
            if not (v > 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive, got {v}")
        if not 0.0 < self.branch_half_angle < math.pi / 2.0:
            raise ValueError(
                f"branch_half_angle must lie in (0, pi/2), "
                f"got {self.branch_half_angle}")

    @property
    def r_main(self) -> float:
        return 0.5 * self.d_main

    @property
    def r_branch_desired(self) -> float:
        return 0.5 * self.d_branch_desired

    @property
    def r_branch_other(self) -> float:
        return 0.5 * self.d_branch_other

    @property
    def apex(self) -> np.ndarray:
        """Centre of the flow-split plane (start of both branch axes)."""
        return np.array([self.l_main, 0.0, 0.0])

    def branch_direction(self, desired: bool = True) -> np.ndarray:
        """Unit axis vector of a branch (+y side when ``desired``)."""
        ca = math.cos(self.branch_half_angle)
        sa = math.sin(self.branch_half_angle)
        return np.array([ca, sa if desired else -sa, 0.0])

    def outlet_arc(self) -> float:
        """Centerline arc length from inlet to either branch outlet."""
        return self.l_main + self.l_branch


def make_geometry(preset: str | None = None, *,
                  d_main: float | None = None,
                  d_branch: float | None = None,
                  d_branch_other: float | None = None,
                  l_main: float | None = None,
                  branch_half_angle: float = DEFAULT_HALF_ANGLE,
                  l_branch: float | None = None) -> BifurcationGeometry:
    """Build a geometry from a named preset or explicit dimensions (SI).

    Presets load their tabulated diameters verbatim (the PCA branch diameter
    intentionally deviates from the symmetric cubed-diameter rule).  Explicit
    construction needs at least ``d_main`` and ``l_main``; the branch diameter
    defaults to the symmetric split rule and the branch length to 4*d_main.
    """
    if preset is not None:
        try:
            dm_mm, db_mm, lm_mm = ARTERY_PRESETS[preset]
        except KeyError:
            known = ", ".join(sorted(ARTERY_PRESETS))
            raise ValueError(f"unknown artery preset {preset!r}; "
                             f"known presets: {known}") from None
        d_main = dm_mm * 1e-3
        d_branch = db_mm * 1e-3
        l_main = lm_mm * 1e-3
    if d_main is None or l_main is None:
        raise ValueError("explicit geometry needs d_main and l_main")
    if d_branch is None:
        d_branch = murray_branch_diameter(d_main)
    if d_branch_other is None:
        d_branch_other = d_branch
    if l_branch is None:
        l_branch = 4.0 * d_main
    return BifurcationGeometry(
        d_main=d_main, d_branch_desired=d_branch,
        d_branch_other=d_branch_other, l_main=l_main,
        branch_half_angle=branch_half_angle, l_branch=l_branch)


def geometry_from_config(path) -> BifurcationGeometry:
    """Load a geometry from a key = value text file.

    Recognized keys: ``artery`` (preset name) or ``d_main_mm``, ``l_main_mm``
    with optional ``d_branch_mm``, ``d_branch_other_mm``,
    ``branch_half_angle_deg`` (default 45) and ``l_branch_mm``.
    """
    keys = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed geometry config line: {line!r}")
            k, v = (part.strip() for part in line.split("=", 1))
            keys[k] = v
    if "artery" in keys:
        return make_geometry(keys["artery"])
    try:
        d_main = float(keys["d_main_mm"]) * 1e-3
        l_main = float(keys["l_main_mm"]) * 1e-3
    except KeyError as exc:
        raise ValueError(f"geometry config missing key: {exc}") from None
    mm = lambda k: float(keys[k]) * 1e-3 if k in keys else None
    angle = (math.radians(float(keys["branch_half_angle_deg"]))
             if "branch_half_angle_deg" in keys else DEFAULT_HALF_ANGLE)
    return make_geometry(d_main=d_main, l_main=l_main,
                         d_branch=mm("d_branch_mm"),
                         d_branch_other=mm("d_branch_other_mm"),
                         branch_half_angle=angle, l_branch=mm("l_branch_mm"))


def entrance_positions(geometry: BifurcationGeometry,
                       r_p: float) -> list[np.ndarray]:
    """Five release positions across the inlet diameter.

    Ordered top wall, mid top-centre, centre, mid bot-centre, bottom wall
    (indices 1..5 elsewhere).  Wall positions sit one particle radius off the
    wall so the one-radius constraint holds at release.
    """
    R = geometry.r_main
    if not 0.0 <= r_p < R:
        raise ValueError(f"particle radius {r_p} must satisfy 0 <= r_p < "
                         f"main radius {R}")
    reach = R - r_p
    offsets = (reach, 0.5 * reach, 0.0, -0.5 * reach, -reach)
    return [np.array([0.0, off, 0.0]) for off in offsets]


@dataclass(frozen=True)
class TargetPlan:
    """Waypoints bracketing the flow split, plus the outlet goal.

    ``upstream_station``/``downstream_station`` are the centerline arc
    lengths of the two intermediate targets; they delimit regions G1/G2/G3
    and are derivable from the offsets, kept here so region queries are
    cheap.
    """

    upstream_offset_diams: int
    downstream_offset_diams: int
    upstream_point: np.ndarray
    downstream_point: np.ndarray
    final_point: np.ndarray
    upstream_station: float
    downstream_station: float


def place_targets(geometry: BifurcationGeometry, d_p: float,
                  upstream_k: int, downstream_k: int) -> TargetPlan:
    """Place the intermediate targets ``k`` particle diameters from the split.

    The upstream target sits k*d_p before the split plane, the downstream
    target k*d_p along the desired branch axis.  Both are offset laterally by
    half the local free radius, (R_local - r_p)/2, toward the desired side:
    slower fluid than the centerline, still one radius clear of the wall.
    """
    if d_p <= 0.0:
        raise ValueError(f"particle diameter must be positive, got {d_p}")
    for name, k in (("upstream_k", upstream_k), ("downstream_k", downstream_k)):
        if not (isinstance(k, (int, np.integer)) and 1 <= k <= 4):
            raise ValueError(f"{name} must be an integer in 1..4, got {k}")
    L = geometry.l_main
    if L - 4.0 * d_p <= 0.0:
        raise ValueError(
            f"main vessel too short for targets: l_main={L}, d_p={d_p}")
    r_p = 0.5 * d_p
    up = np.array([L - upstream_k * d_p, 0.5 * (geometry.r_main - r_p), 0.0])
    u_hat = geometry.branch_direction(desired=True)
    n_hat = np.array([-u_hat[1], u_hat[0], 0.0])  # toward the outer wall side
    down = (geometry.apex + downstream_k * d_p * u_hat
            + 0.5 * (geometry.r_branch_desired - r_p) * n_hat)
    final = geometry.apex + geometry.l_branch * u_hat
    plan = TargetPlan(
        upstream_offset_diams=int(upstream_k),
        downstream_offset_diams=int(downstream_k),
        upstream_point=up, downstream_point=down, final_point=final,
        upstream_station=L - upstream_k * d_p,
        downstream_station=L + downstream_k * d_p)
    for label, point in (("upstream", up), ("downstream", down),
                         ("final", final)):
        dist, _ = wall_distance(geometry, point)
        if dist < r_p - 1e-12:
            raise ValueError(f"{label} target {point} violates the one-radius "
                             f"wall constraint (clearance {dist}, need {r_p})")
    return plan


def centerline_arc(geometry: BifurcationGeometry, position) -> float:
    """Arc length along the inlet->split->branch centerline for a position.

    Equal to x in the main vessel; past the split plane it is l_main plus the
    largest branch-axis projection, so it grows monotonically along any
    forward trajectory in either branch.
    """
    x, y, _ = (float(position[0]), float(position[1]), float(position[2]))
    return _arc_scalar(geometry.l_main, math.cos(geometry.branch_half_angle),
                       math.sin(geometry.branch_half_angle), x, y)


def _arc_scalar(L, ca, sa, x, y):
    if x < L:
        return x
    dx = x - L
    s = dx * ca + abs(y) * sa  # the two branch projections differ by sign(y)
    return L + (s if s > 0.0 else 0.0)


def classify_region(position, plan: TargetPlan,
                    geometry: BifurcationGeometry) -> int:
    """Region index along the path: 1 before the upstream target's station,
    2 between the stations, 3 past the downstream station."""
    arc = centerline_arc(geometry, position)
    if arc < plan.upstream_station:
        return 1
    if arc < plan.downstream_station:
        return 2
    return 3


def wall_distance(geometry: BifurcationGeometry,
                  position) -> tuple[float, np.ndarray]:
    """Distance from a point to the nearest vessel wall, with inward normal.

    Positive inside the lumen, negative outside; 1-Lipschitz and continuous
    (for equal branch diameters).  Inside overlap zones around the junction
    the value is conservative, never claiming more clearance than the true
    wall allows.  The normal points from the nearest wall into the lumen;
    on the centerline the tie breaks toward +y.
    """
    x, y, z = (float(position[0]), float(position[1]), float(position[2]))
    d, nx, ny, nz = _wall_scalar(
        geometry.r_main, geometry.l_main, geometry.r_branch_desired,
        geometry.r_branch_other, math.cos(geometry.branch_half_angle),
        math.sin(geometry.branch_half_angle), x, y, z)
    return d, np.array([nx, ny, nz])


def _wall_scalar(R1, L, R2p, R2m, ca, sa, x, y, z):
    """Scalar core of wall_distance; returns (signed distance, normal xyz).

    Signed-distance union of the main vessel (radial wall plus the end face
    at the split plane, open at the inlet) and the branch tube on the
    query's side of the symmetry plane, treated as an infinite cylinder
    about its axis line.  Gating the branches by sign(y) keeps the mirrored
    tube's backward extension from opening phantom lumen across the
    symmetry plane; the union max leaves the junction throat open while the
    end face supplies the out-of-plane wall the branch mouths do not cover,
    and the region between the tubes past the split forms the apex wedge.
    Conservative (never overestimates clearance) where main and branch
    overlap.  Both terms are 1-Lipschitz; for equal branch radii the gate
    is continuous across y = 0.
    """
    rho = math.hypot(y, z)
    rad_m = R1 - rho
    cap_m = L - x
    phi_m = rad_m if rad_m < cap_m else cap_m

    if y >= 0.0:
        uy, R2 = sa, R2p
    else:
        uy, R2 = -sa, R2m
    px = x - L
    s = px * ca + y * uy
    perp2 = px * px + y * y + z * z - s * s
    rb = math.sqrt(perp2) if perp2 > 0.0 else 0.0
    phi_b = R2 - rb

    if phi_b > phi_m:
        if rb > 1e-300:
            inv = 1.0 / rb
            # inward = from the tube wall toward the axis
            nx = -(px - s * ca) * inv
            ny = -(y - s * uy) * inv
            nz = -z * inv
        else:
            nx, ny, nz = -uy, ca, 0.0  # on the branch axis: arbitrary radial
        return phi_b, nx, ny, nz
    if rad_m < cap_m:
        if rho > 1e-300:
            inv = 1.0 / rho
            return phi_m, 0.0, -y * inv, -z * inv
        return phi_m, 0.0, 1.0, 0.0  # centerline tie: wall toward -y
    return phi_m, -1.0, 0.0, 0.0
