"""Full-factorial scenario grids and their parallel execution.

Two built-in designs ("table2", the baseline grid; "table4", the robustness
grid with shifted levels and widened arteries) each combine 5 diameters x
3 arteries x 5 peak velocities x 5 entrance positions x 16 target pairings
into 6000 scenarios.  ``run_sweep`` executes a grid deterministically: the
result list and the persisted CSV are in grid order and bit-identical
regardless of the worker count.
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields

from .geometry import make_geometry, place_targets
from .hemodynamics import CarreauModel, analytic_bifurcation_flow, load_grid_field
from .dynamics import Microrobot
from .control import (ConstantMode, DynamicMode, OUTCOME_STALLED,
                      run_trajectory)

TABLE2_DIAMETERS_UM = (50.0, 100.0, 250.0, 500.0, 1000.0)
TABLE2_VELOCITIES = (0.25, 0.35, 0.45, 0.55, 0.65)
TABLE2_ARTERIES = ("ACA", "MCA", "PCA")

TABLE4_DIAMETERS_UM = (75.0, 175.0, 375.0, 650.0, 850.0)
TABLE4_VELOCITIES = (0.30, 0.40, 0.50, 0.60, 0.70)
TABLE4_ARTERIES = ("ACA+0.2", "MCA+0.2", "PCA+0.2")

ENTRANCES = (1, 2, 3, 4, 5)
TARGET_OFFSETS = (1, 2, 3, 4)


@dataclass(frozen=True)
class ScenarioSpec:
    """One factorial cell.  ``d_p`` in metres; fully deterministic."""

    d_p: float
    artery: str
    u_max: float
    entrance_index: int
    upstream_k: int
    downstream_k: int
    mode: str = "dynamic"


def factorial_grid(*, diameters, arteries, u_maxes, entrances=ENTRANCES,
                   upstream_ks=TARGET_OFFSETS, downstream_ks=TARGET_OFFSETS,
                   mode: str = "dynamic") -> list[ScenarioSpec]:
    """Cartesian product of the factor levels, lexicographic in the order
    diameter, artery, velocity, entrance, upstream, downstream."""
    factors = {"diameters": diameters, "arteries": arteries,
               "u_maxes": u_maxes, "entrances": entrances,
               "upstream_ks": upstream_ks, "downstream_ks": downstream_ks}
    for name, levels in factors.items():
        if len(tuple(levels)) == 0:
            raise ValueError(f"factor {name} has no levels")
    grid = []
    for d in diameters:
        for artery in arteries:
            for u in u_maxes:
                for e in entrances:
                    for ku in upstream_ks:
                        for kd in downstream_ks:
                            grid.append(ScenarioSpec(
                                d_p=float(d), artery=artery, u_max=float(u),
                                entrance_index=int(e), upstream_k=int(ku),
                                downstream_k=int(kd), mode=mode))
    return grid


def design_table2(mode: str = "dynamic") -> list[ScenarioSpec]:
    """The baseline 6000-scenario factorial design."""
    return factorial_grid(
        diameters=[d * 1e-6 for d in TABLE2_DIAMETERS_UM],
        arteries=TABLE2_ARTERIES, u_maxes=TABLE2_VELOCITIES, mode=mode)


def design_table4(mode: str = "dynamic") -> list[ScenarioSpec]:
    """The robustness design: new diameters/velocities, widened arteries."""
    return factorial_grid(
        diameters=[d * 1e-6 for d in TABLE4_DIAMETERS_UM],
        arteries=TABLE4_ARTERIES, u_maxes=TABLE4_VELOCITIES, mode=mode)


@dataclass(frozen=True)
class SweepSettings:
    """Execution settings shared by every scenario of a sweep (picklable).

    ``constant_gradients`` maps robot diameter (m) to (g1, g2, g3) in T/m for
    constant-mode replay, as a tuple of (d_p, g1, g2, g3) rows.
    """

    mode: str = "dynamic"
    constant_gradients: tuple = ()
    gravity_compensation: bool = True
    gravity: bool = True
    tau_viscosity: str = "carreau"
    cor: float = 1.0
    gradient_cap: float | None = None
    rho_f: float = 1060.0
    n_profile: float = 0.89
    carreau: tuple = (0.056, 0.00345, 3.313, 0.3568)
    rho_p: float = 5200.0
    m_s: float = 5.0e5
    flow: str = "analytic"
    max_steps: int = 1_000_000

    def constant_mode_for(self, d_p: float) -> ConstantMode:
        for row in self.constant_gradients:
            if math.isclose(row[0], d_p, rel_tol=1e-12, abs_tol=0.0):
                return ConstantMode(g1=row[1], g2=row[2], g3=row[3],
                                    gravity_compensation=self.gravity_compensation,
                                    gradient_cap=self.gradient_cap)
        raise ValueError(f"no constant gradients configured for d_p={d_p}")


REGION_FIELDS = ("n", "mean", "median", "max", "angle")


@dataclass(frozen=True)
class ScenarioResult:
    """Per-scenario outcome plus region gradient statistics.

    Region stats are None for regions the trajectory never visited.
    Magnitudes in T/m, angles in radians, times in seconds.
    """

    d_p: float
    artery: str
    u_max: float
    entrance_index: int
    upstream_k: int
    downstream_k: int
    mode: str
    outcome: str
    collisions: int
    transit_time: float
    wall_margin_min: float
    g1_n: int | None = None
    g1_mean: float | None = None
    g1_median: float | None = None
    g1_max: float | None = None
    g1_angle: float | None = None
    g2_n: int | None = None
    g2_mean: float | None = None
    g2_median: float | None = None
    g2_max: float | None = None
    g2_angle: float | None = None
    g3_n: int | None = None
    g3_mean: float | None = None
    g3_median: float | None = None
    g3_max: float | None = None
    g3_angle: float | None = None

    def region(self, region: int, stat: str):
        return getattr(self, f"g{region}_{stat}")


_WORKER_CACHE = {}


def _build_context(artery: str, u_max: float, settings: SweepSettings):
    key = (artery, u_max)
    ctx = _WORKER_CACHE.get(key)
    if ctx is None:
        geometry = make_geometry(artery)
        carreau = CarreauModel(*settings.carreau)
        if settings.flow == "analytic":
            flow = analytic_bifurcation_flow(
                geometry, u_max, carreau=carreau,
                n_profile=settings.n_profile, rho_f=settings.rho_f)
        else:
            flow = load_grid_field(settings.flow, n_profile=settings.n_profile,
                                   rho_f=settings.rho_f)
        ctx = (geometry, flow, carreau)
        _WORKER_CACHE[key] = ctx
    return ctx


def run_scenario(spec: ScenarioSpec, settings: SweepSettings) -> ScenarioResult:
    """Execute a single scenario; failures surface as a stalled outcome."""
    geometry, flow, carreau = _build_context(spec.artery, spec.u_max, settings)
    robot = Microrobot(d_p=spec.d_p, rho_p=settings.rho_p, m_s=settings.m_s)
    base = dict(d_p=spec.d_p, artery=spec.artery, u_max=spec.u_max,
                entrance_index=spec.entrance_index,
                upstream_k=spec.upstream_k, downstream_k=spec.downstream_k,
                mode=settings.mode)
    try:
        plan = place_targets(geometry, spec.d_p, spec.upstream_k,
                             spec.downstream_k)
        if settings.mode == "dynamic":
            mode = DynamicMode(gradient_cap=settings.gradient_cap)
        else:
            mode = settings.constant_mode_for(spec.d_p)
        rec = run_trajectory(
            geometry, flow, robot, plan, mode,
            entrance_index=spec.entrance_index, cor=settings.cor,
            gravity=settings.gravity, tau_viscosity=settings.tau_viscosity,
            carreau=carreau, max_steps=settings.max_steps)
    except Exception:
        return ScenarioResult(**base, outcome=OUTCOME_STALLED, collisions=0,
                              transit_time=0.0, wall_margin_min=math.nan)
    region_kwargs = {}
    for region in (1, 2, 3):
        stats = rec.region_stats.get(region)
        if stats is None:
            continue
        region_kwargs[f"g{region}_n"] = stats.n
        region_kwargs[f"g{region}_mean"] = stats.mean
        region_kwargs[f"g{region}_median"] = stats.median
        region_kwargs[f"g{region}_max"] = stats.max
        region_kwargs[f"g{region}_angle"] = stats.angle
    return ScenarioResult(**base, outcome=rec.outcome,
                          collisions=rec.collision_count,
                          transit_time=rec.transit_time,
                          wall_margin_min=rec.wall_margin_min,
                          **region_kwargs)


def _run_indexed(args):
    index, spec, settings = args
    return index, run_scenario(spec, settings)


def run_sweep(grid: list[ScenarioSpec], settings: SweepSettings,
              workers: int = 1, progress=None) -> list[ScenarioResult]:
    """Run every scenario; results come back in grid order.

    The physics is deterministic and scenarios share no mutable state, so the
    output is a pure function of (grid, settings) whatever ``workers`` is.
    ``progress``, if given, is called with (done, total).
    """
    if not grid:
        raise ValueError("empty scenario grid")
    total = len(grid)
    results: list = [None] * total
    if workers <= 1:
        for i, spec in enumerate(grid):
            results[i] = run_scenario(spec, settings)
            if progress is not None:
                progress(i + 1, total)
        return results
    tasks = [(i, spec, settings) for i, spec in enumerate(grid)]
    chunk = max(1, total // (workers * 16))
    done = 0
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for index, result in pool.map(_run_indexed, tasks, chunksize=chunk):
            results[index] = result
            done += 1
            if progress is not None:
                progress(done, total)
    return results


def navigation_success(results) -> float:
    """Fraction of scenarios whose robot reached the desired branch."""
    outcomes = [r.outcome if hasattr(r, "outcome") else r for r in results]
    if not outcomes:
        raise ValueError("no results to score")
    return sum(1 for o in outcomes if o == "desired") / len(outcomes)


_CSV_HEADER_COMMENT = (
    "# one row per scenario; d_p_um um, u_max m/s, transit_time s, "
    "wall_margin_min m, gradient magnitudes (mean/median/max) T/m, "
    "angles rad, entrance 1=top wall .. 5=bottom wall, "
    "upstream/downstream targets in robot diameters from the flow split\n")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_results_csv(results, path) -> None:
    """Persist results in grid order; byte-identical for identical inputs."""
    cols = [f.name for f in fields(ScenarioResult)]
    with open(path, "w", newline="") as fh:
        fh.write(_CSV_HEADER_COMMENT)
        writer = csv.writer(fh, lineterminator="\n")
        header = ["d_p_um" if c == "d_p" else c for c in cols]
        writer.writerow(header)
        for r in results:
            row = []
            for c in cols:
                v = getattr(r, c)
                if c == "d_p":
                    v = round(v * 1e6, 9)
                row.append(_fmt(v))
            writer.writerow(row)


def load_results_csv(path) -> list[ScenarioResult]:
    """Read back a results CSV written by write_results_csv."""
    out = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"empty results file {path}")
    header = rows[0]
    expected = ["d_p_um" if f.name == "d_p" else f.name
                for f in fields(ScenarioResult)]
    if header != expected:
        raise ValueError(f"unexpected results header in {path}")
    ints = {"entrance_index", "upstream_k", "downstream_k", "collisions",
            "g1_n", "g2_n", "g3_n"}
    strs = {"artery", "mode", "outcome"}
    for row in rows[1:]:
        kwargs = {}
        for name, raw in zip(expected, row):
            field_name = "d_p" if name == "d_p_um" else name
            if raw == "":
                kwargs[field_name] = None
            elif field_name in strs:
                kwargs[field_name] = raw
            elif field_name in ints:
                kwargs[field_name] = int(raw)
            elif field_name == "d_p":
                kwargs[field_name] = float(raw) * 1e-6
            else:
                kwargs[field_name] = float(raw)
        out.append(ScenarioResult(**kwargs))
    return out
