"""Blood rheology and steady flow fields over the bifurcation.

Two flow-field implementations share a small query interface (velocity and
scalar shear rate at a point, plus fluid constants): an analytic surrogate
composed of fully developed profiles blended through the junction, and a
trilinear interpolator over an imported structured grid (for externally
computed fields).
"""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import BifurcationGeometry

RHO_BLOOD = 1060.0      # kg/m^3
N_PROFILE = 0.89        # inlet-profile exponent for shear-thinning blood


@dataclass(frozen=True)
class CarreauModel:
    """Shear-thinning viscosity law bridging low- and high-shear plateaus.

    eta(gamma) = eta_inf + (eta_0 - eta_inf) * [1 + (lam*gamma)^2]^((n-1)/2)
    """

    eta_0: float = 0.056
    eta_inf: float = 0.00345
    lam: float = 3.313
    n: float = 0.3568

    def __post_init__(self):
        if not self.eta_0 > self.eta_inf > 0.0:
            raise ValueError("need eta_0 > eta_inf > 0, got "
                             f"eta_0={self.eta_0}, eta_inf={self.eta_inf}")
        if not self.lam > 0.0:
            raise ValueError(f"time constant must be positive, got {self.lam}")
        if not 0.0 < self.n < 1.0:
            raise ValueError(f"shear-thinning needs 0 < n < 1, got {self.n}")

    def viscosity(self, gamma_dot: float) -> float:
        return apparent_viscosity(self, gamma_dot)


def apparent_viscosity(model: CarreauModel, gamma_dot: float) -> float:
    """Apparent viscosity (Pa.s) at a scalar shear rate (1/s)."""
    if gamma_dot < 0.0:
        raise ValueError(f"shear rate must be non-negative, got {gamma_dot}")
    x = model.lam * gamma_dot
    return (model.eta_inf + (model.eta_0 - model.eta_inf)
            * (1.0 + x * x) ** (0.5 * (model.n - 1.0)))


def inlet_profile(u_max: float, r: float, R: float,
                  n_profile: float = N_PROFILE) -> float:
    """Fully developed axial velocity at radius r in a vessel of radius R.

    u(r) = u_max * [1 - (r/R)^((n+1)/n)]; flatter than parabolic for n < 1.
    """
    if not 0.0 <= r <= R:
        raise ValueError(f"radial position {r} outside [0, {R}]")
    m = (n_profile + 1.0) / n_profile
    return u_max * (1.0 - (r / R) ** m)


def profile_flux(u_max: float, R: float,
                 n_profile: float = N_PROFILE) -> float:
    """Volumetric flux of the fully developed profile over a circular section:
    Q = u_max * pi * R^2 * (n+1)/(3n+1)."""
    n = n_profile
    return u_max * math.pi * R * R * (n + 1.0) / (3.0 * n + 1.0)


class FlowField:
    """Steady velocity/shear queries over the lumen (immutable)."""

    rho_f: float
    n_profile: float

    def velocity(self, position) -> np.ndarray:
        raise NotImplementedError

    def shear_rate(self, position) -> float:
        raise NotImplementedError

    def velocity_and_shear(self, position) -> tuple[np.ndarray, float]:
        x, y, z = (float(position[0]), float(position[1]), float(position[2]))
        ux, uy, uz, g = self._eval(x, y, z)
        return np.array([ux, uy, uz]), g

    def _eval(self, x: float, y: float, z: float):
        raise NotImplementedError


class AnalyticBifurcationFlow(FlowField):
    """Composite analytic surrogate for the bifurcation flow.

    The main vessel carries the fully developed profile along +x; each branch
    carries the same profile shape about its own axis, with its peak velocity
    set by a 50/50 flux split.  Within one main diameter either side of the
    split plane the two descriptions are blended linearly in x.  The shear
    rate is the radial derivative magnitude of the locally active profile,
    blended the same way.
    """

    def __init__(self, geometry: BifurcationGeometry, u_max: float,
                 carreau: CarreauModel | None = None,
                 n_profile: float = N_PROFILE, rho_f: float = RHO_BLOOD):
        if not u_max > 0.0:
            raise ValueError(f"peak inlet velocity must be positive, got {u_max}")
        self.geometry = geometry
        self.u_max = u_max
        self.carreau = carreau if carreau is not None else CarreauModel()
        self.n_profile = n_profile
        self.rho_f = rho_f
        self._m = (n_profile + 1.0) / n_profile
        self._R1 = geometry.r_main
        self._L = geometry.l_main
        self._ca = math.cos(geometry.branch_half_angle)
        self._sa = math.sin(geometry.branch_half_angle)
        # half the inlet flux through each branch, same profile shape
        self._R2p = geometry.r_branch_desired
        self._R2m = geometry.r_branch_other
        self._up = u_max * self._R1 ** 2 / (2.0 * self._R2p ** 2)
        self._um = u_max * self._R1 ** 2 / (2.0 * self._R2m ** 2)
        self._blend_lo = self._L - geometry.d_main
        self._inv_blend = 1.0 / (2.0 * geometry.d_main)

    def branch_peak_velocity(self, desired: bool = True) -> float:
        return self._up if desired else self._um

    def inlet_flux(self) -> float:
        return profile_flux(self.u_max, self._R1, self.n_profile)

    def velocity(self, position) -> np.ndarray:
        x, y, z = (float(position[0]), float(position[1]), float(position[2]))
        ux, uy, uz, _ = self._eval(x, y, z)
        return np.array([ux, uy, uz])

    def shear_rate(self, position) -> float:
        x, y, z = (float(position[0]), float(position[1]), float(position[2]))
        return self._eval(x, y, z)[3]

    def _profile(self, r, R, u_peak):
        # speed and |du/dr| of the developed profile, clamped at the wall
        rr = r / R
        if rr >= 1.0:
            return 0.0, u_peak * self._m / R
        u = u_peak * (1.0 - rr ** self._m)
        g = u_peak * self._m / R * rr ** (self._m - 1.0)
        return u, g

    def _eval(self, x, y, z):
        w = (x - self._blend_lo) * self._inv_blend
        if w <= 0.0:
            # pure main-vessel flow
            u, g = self._profile(math.hypot(y, z), self._R1, self.u_max)
            return u, 0.0, 0.0, g
        # branch on the particle's side of the split plane (+y at the tie)
        if y >= 0.0:
            uy_dir, R2, upk = self._sa, self._R2p, self._up
        else:
            uy_dir, R2, upk = -self._sa, self._R2m, self._um
        px, py = x - self._L, y
        s = px * self._ca + py * uy_dir
        perp2 = px * px + py * py + z * z - s * s
        rb = math.sqrt(perp2) if perp2 > 0.0 else 0.0
        ub, gb = self._profile(rb, R2, upk)
        if w >= 1.0:
            return ub * self._ca, ub * uy_dir, 0.0, gb
        um, gm = self._profile(math.hypot(y, z), self._R1, self.u_max)
        cw = 1.0 - w
        return (cw * um + w * ub * self._ca, w * ub * uy_dir, 0.0,
                cw * gm + w * gb)


class GridField(FlowField):
    """Trilinear interpolation over an axis-aligned structured velocity grid.

    Nodes outside the lumen are masked; their velocities are zeroed so
    interpolation decays to no-slip at the wall.  Queries are clamped to the
    grid bounding box; a query whose whole surrounding cell is masked out is
    an error.
    """

    def __init__(self, origin, spacing: float, velocities: np.ndarray,
                 mask: np.ndarray, n_profile: float = N_PROFILE,
                 rho_f: float = RHO_BLOOD):
        velocities = np.asarray(velocities, dtype=float)
        mask = np.asarray(mask, dtype=bool)
        if velocities.ndim != 4 or velocities.shape[3] != 3:
            raise ValueError("velocities must have shape (nx, ny, nz, 3)")
        if mask.shape != velocities.shape[:3]:
            raise ValueError("mask shape must match the grid")
        if not mask.any():
            raise ValueError("grid mask is empty (no fluid nodes)")
        if not spacing > 0.0:
            raise ValueError(f"grid spacing must be positive, got {spacing}")
        self.origin = np.asarray(origin, dtype=float)
        self.spacing = float(spacing)
        self.mask = mask
        self.velocities = np.where(mask[..., None], velocities, 0.0)
        self.n_profile = n_profile
        self.rho_f = rho_f
        self._n = velocities.shape[:3]

    def velocity(self, position) -> np.ndarray:
        x, y, z = (float(position[0]), float(position[1]), float(position[2]))
        ux, uy, uz, _ = self._eval(x, y, z, with_shear=False)
        return np.array([ux, uy, uz])

    def shear_rate(self, position) -> float:
        x, y, z = (float(position[0]), float(position[1]), float(position[2]))
        return self._eval(x, y, z)[3]

    def _interp(self, x, y, z):
        h = self.spacing
        ox, oy, oz = self.origin
        nx, ny, nz = self._n
        fx = min(max((x - ox) / h, 0.0), nx - 1.0)
        fy = min(max((y - oy) / h, 0.0), ny - 1.0)
        fz = min(max((z - oz) / h, 0.0), nz - 1.0)
        i = min(int(fx), nx - 2) if nx > 1 else 0
        j = min(int(fy), ny - 2) if ny > 1 else 0
        k = min(int(fz), nz - 2) if nz > 1 else 0
        tx, ty, tz = fx - i, fy - j, fz - k
        i1 = min(i + 1, nx - 1)
        j1 = min(j + 1, ny - 1)
        k1 = min(k + 1, nz - 1)
        cell_mask = self.mask[i:i1 + 1, j:j1 + 1, k:k1 + 1]
        if not cell_mask.any():
            raise ValueError(f"query ({x}, {y}, {z}) lies outside the "
                             "grid's fluid region")
        v = self.velocities
        out = np.empty(3)
        for c in range(3):
            c00 = v[i, j, k, c] * (1 - tx) + v[i1, j, k, c] * tx
            c10 = v[i, j1, k, c] * (1 - tx) + v[i1, j1, k, c] * tx
            c01 = v[i, j, k1, c] * (1 - tx) + v[i1, j, k1, c] * tx
            c11 = v[i, j1, k1, c] * (1 - tx) + v[i1, j1, k1, c] * tx
            out[c] = ((c00 * (1 - ty) + c10 * ty) * (1 - tz)
                      + (c01 * (1 - ty) + c11 * ty) * tz)
        return out

    def _eval(self, x, y, z, with_shear=True):
        u = self._interp(x, y, z)
        if not with_shear:
            return u[0], u[1], u[2], 0.0
        # velocity gradient by central differences at half-spacing, then
        # gamma = sqrt(2 D:D) with D the symmetric strain-rate tensor
        h = 0.5 * self.spacing
        grad = np.empty((3, 3))
        for ax, dv in enumerate(((h, 0.0, 0.0), (0.0, h, 0.0), (0.0, 0.0, h))):
            up = self._interp(x + dv[0], y + dv[1], z + dv[2])
            dn = self._interp(x - dv[0], y - dv[1], z - dv[2])
            grad[:, ax] = (up - dn) / (2.0 * h)
        D = 0.5 * (grad + grad.T)
        return u[0], u[1], u[2], math.sqrt(2.0 * float(np.sum(D * D)))


def write_grid_field(path, origin, spacing: float, velocities: np.ndarray,
                     mask: np.ndarray) -> None:
    """Write a grid field file (documented format, see load_grid_field)."""
    velocities = np.asarray(velocities, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    nx, ny, nz = velocities.shape[:3]
    with open(path, "w") as fh:
        fh.write("# magnav grid field v1: mask ux uy uz per node, "
                 "x varying fastest\n")
        fh.write(f"{nx} {ny} {nz}\n")
        fh.write(f"{origin[0]!r} {origin[1]!r} {origin[2]!r}\n")
        fh.write(f"{spacing!r}\n")
        fh.write("units m m/s\n")
        for k in range(nz):
            for j in range(ny):
                for i in range(nx):
                    v = velocities[i, j, k]
                    fh.write(f"{int(mask[i, j, k])} "
                             f"{v[0]!r} {v[1]!r} {v[2]!r}\n")


def load_grid_field(path, n_profile: float = N_PROFILE,
                    rho_f: float = RHO_BLOOD) -> GridField:
    """Load a structured grid field.

    Format: a comment line, then ``nx ny nz``, origin ``ox oy oz`` (m), the
    uniform node spacing (m; one value, or three equal values), a units line,
    and one ``mask ux uy uz`` record per node with x varying fastest, then y,
    then z.
    """
    with open(path) as fh:
        lines = [ln for ln in (raw.split("#", 1)[0].strip() for raw in fh)
                 if ln]
    try:
        nx, ny, nz = (int(tok) for tok in lines[0].split())
        origin = tuple(float(tok) for tok in lines[1].split())
        spacings = tuple(float(tok) for tok in lines[2].split())
    except (IndexError, ValueError) as exc:
        raise ValueError(f"malformed grid field header in {path}: {exc}")
    if len(origin) != 3:
        raise ValueError("grid origin must have three components")
    if len(spacings) not in (1, 3):
        raise ValueError("spacing line must hold one or three values")
    if len(spacings) == 3 and not (spacings[0] == spacings[1] == spacings[2]):
        raise ValueError(f"non-uniform grid spacing unsupported: {spacings}")
    spacing = spacings[0]
    body = lines[3:]
    if body and body[0].startswith("units"):
        body = body[1:]
    n_nodes = nx * ny * nz
    if len(body) != n_nodes:
        raise ValueError(f"grid field {path} truncated or padded: expected "
                         f"{n_nodes} node records, found {len(body)}")
    mask = np.empty((nx, ny, nz), dtype=bool)
    vel = np.empty((nx, ny, nz, 3), dtype=float)
    idx = 0
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                toks = body[idx].split()
                if len(toks) != 4:
                    raise ValueError(
                        f"malformed node record {idx} in {path}: {body[idx]!r}")
                mask[i, j, k] = bool(int(toks[0]))
                vel[i, j, k] = [float(toks[1]), float(toks[2]), float(toks[3])]
                idx += 1
    return GridField(origin, spacing, vel, mask,
                     n_profile=n_profile, rho_f=rho_f)


def analytic_bifurcation_flow(geometry: BifurcationGeometry, u_max: float,
                              carreau: CarreauModel | None = None,
                              n_profile: float = N_PROFILE,
                              rho_f: float = RHO_BLOOD) -> AnalyticBifurcationFlow:
    """Convenience constructor for the analytic surrogate field."""
    return AnalyticBifurcationFlow(geometry, u_max, carreau=carreau,
                                   n_profile=n_profile, rho_f=rho_f)
