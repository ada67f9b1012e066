"""Aggregation of sweep results: boxplot statistics, gradient-demand maps,
factor min/max ratio tables, diameter fits, and constant-mode replay reports.

Population statistics operate on the per-scenario region averages (each
scenario contributes its mean |gradient| per region), matching how the maps
and medians are meant to be read.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

REGIONS = (1, 2, 3)


@dataclass(frozen=True)
class BoxplotStats:
    """Five-number-style summary with 1.5*IQR whiskers and outliers."""

    n: int
    mean: float
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple

    @property
    def iqr(self) -> float:
        return self.q3 - self.q1


def boxplot_stats(values) -> BoxplotStats:
    """Median/quartiles by linear interpolation of order statistics; whiskers
    at the most extreme data within 1.5*IQR of the quartiles."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("no values to summarize")
    q1, med, q3 = np.percentile(arr, [25.0, 50.0, 75.0])
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = arr[(arr >= lo_fence) & (arr <= hi_fence)]
    outliers = arr[(arr < lo_fence) | (arr > hi_fence)]
    return BoxplotStats(n=int(arr.size), mean=float(arr.mean()),
                        median=float(med), q1=float(q1), q3=float(q3),
                        whisker_low=float(inside.min()),
                        whisker_high=float(inside.max()),
                        outliers=tuple(float(v) for v in np.sort(outliers)))


def fold_angle_deg(angle_rad: float) -> float:
    """Azimuth folded to [0, 180] degrees (up/down symmetric)."""
    return abs(math.degrees(angle_rad))


def region_values(results, region: int, stat: str = "mean",
                  predicate=None) -> np.ndarray:
    """Collect one per-scenario region statistic across results, skipping
    scenarios that never visited the region."""
    out = []
    for r in results:
        if predicate is not None and not predicate(r):
            continue
        v = r.region(region, stat)
        if v is not None:
            out.append(v)
    return np.asarray(out, dtype=float)


def gradient_maps(results, artery: str, u_max: float):
    """Per (diameter, entrance) tables of region means and collision counts.

    Returns {"g1"|"g2"|"g3"|"collisions": {(d_p, entrance): 4x4 array}} with
    rows indexed by upstream offset 1..4 and columns by downstream offset
    1..4.  Cells with no matching scenario hold NaN (reported empty in CSV).
    """
    subset = [r for r in results
              if r.artery == artery and math.isclose(r.u_max, u_max)]
    keys = sorted({(r.d_p, r.entrance_index) for r in subset})
    maps = {label: {} for label in ("g1", "g2", "g3", "collisions")}
    for key in keys:
        acc = {label: [[[] for _ in range(4)] for _ in range(4)]
               for label in maps}
        for r in subset:
            if (r.d_p, r.entrance_index) != key:
                continue
            i, j = r.upstream_k - 1, r.downstream_k - 1
            acc["collisions"][i][j].append(float(r.collisions))
            for region in REGIONS:
                v = r.region(region, "mean")
                if v is not None:
                    acc[f"g{region}"][i][j].append(v)
        for label in maps:
            table = np.full((4, 4), np.nan)
            for i in range(4):
                for j in range(4):
                    cell = acc[label][i][j]
                    if cell:
                        table[i, j] = float(np.mean(cell))
            maps[label][key] = table
    return maps


def maps_to_csv(maps, artery: str, u_max: float, out_dir, prefix="map") -> list:
    """One CSV per map label; returns the written paths."""
    import os
    written = []
    for label, tables in maps.items():
        path = os.path.join(
            out_dir, f"{prefix}_{artery.replace('+', 'p')}_"
                     f"{u_max:.2f}_{label}.csv")
        with open(path, "w", newline="") as fh:
            fh.write("# rows: upstream offset 1..4 diameters; "
                     "columns: downstream offset 1..4; empty = no data\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["d_p_um", "entrance", "upstream_k",
                             "down_1", "down_2", "down_3", "down_4"])
            for (d_p, entrance), table in sorted(tables.items()):
                for i in range(4):
                    row = [round(d_p * 1e6, 9), entrance, i + 1]
                    row += ["" if math.isnan(v) else repr(float(v))
                            for v in table[i]]
                    writer.writerow(row)
        written.append(path)
    return written


# factor accessors for the min/max ratio table; upstream offsets are compared
# as signed positions (-4D is the minimum level, -1D the maximum)
_FACTORS = (
    ("diameter", lambda r: r.d_p),
    ("velocity", lambda r: r.u_max),
    ("entrance", lambda r: r.entrance_index),
    ("upstream_target", lambda r: -r.upstream_k),
)


def median_ratio_table(results, stat: str = "mean") -> list[dict]:
    """Medians of region gradients at each factor's extreme levels.

    For every factor, the population at its minimum and maximum level is
    summarized by the per-region median, and the min/max ratio quantifies the
    factor's leverage on the demanded gradients.
    """
    table = []
    for name, key in _FACTORS:
        levels = sorted({key(r) for r in results})
        lo, hi = levels[0], levels[-1]
        row = {"factor": name, "level_min": lo, "level_max": hi}
        for region in REGIONS:
            med_lo = region_values(results, region, stat,
                                   lambda r, lv=lo: key(r) == lv)
            med_hi = region_values(results, region, stat,
                                   lambda r, lv=hi: key(r) == lv)
            m_lo = float(np.median(med_lo)) if med_lo.size else math.nan
            m_hi = float(np.median(med_hi)) if med_hi.size else math.nan
            row[f"g{region}_min"] = m_lo
            row[f"g{region}_max"] = m_hi
            row[f"g{region}_ratio"] = (m_lo / m_hi if m_hi not in (0.0,)
                                       and not math.isnan(m_hi) else math.nan)
        table.append(row)
    return table


def medians_by_diameter(results, stat: str = "mean") -> dict:
    """Per-diameter medians of the per-scenario region means: the inputs to
    the predictive fit."""
    diameters = sorted({r.d_p for r in results})
    out = {}
    for d in diameters:
        meds = []
        for region in REGIONS:
            vals = region_values(results, region, stat,
                                 lambda r, dv=d: r.d_p == dv)
            if vals.size == 0:
                raise ValueError(f"no region {region} data at d_p={d}")
            meds.append(float(np.median(vals)))
        out[d] = tuple(meds)
    return out


BASES = ("inverse", "poly")


@dataclass(frozen=True)
class FitModel:
    """Least-squares quadratic fit of region medians versus diameter.

    basis "inverse": G(d) = c0 + c1/d + c2/d^2 (drag/volume scaling);
    basis "poly":    G(d) = c0 + c1*d + c2*d^2.
    ``coefficients`` has one (c0, c1, c2) row per region G1..G3; diameters
    in metres.
    """

    basis: str
    coefficients: tuple
    residual_rss: tuple
    diameters: tuple

    def predict(self, d_p: float) -> tuple:
        x = _basis_x(self.basis, d_p)
        row = (1.0, x, x * x)
        return tuple(sum(c * b for c, b in zip(coeffs, row))
                     for coeffs in self.coefficients)


def _basis_x(basis: str, d_p: float) -> float:
    if basis == "inverse":
        return 1.0 / d_p
    if basis == "poly":
        return d_p
    raise ValueError(f"unknown fit basis {basis!r}; choose from {BASES}")


def fit_predictive_equations(medians: dict, basis: str = "inverse") -> FitModel:
    """Fit G1..G3 medians against diameter with a quadratic basis.

    ``medians`` maps diameter (m) to (g1, g2, g3).  Exact recovery for data
    already in the basis span; raises on fewer than three distinct diameters.
    """
    diameters = sorted(medians)
    if len(diameters) < 3:
        raise ValueError("need at least three distinct diameters to fit")
    xs = np.array([_basis_x(basis, d) for d in diameters])
    design = np.column_stack([np.ones_like(xs), xs, xs * xs])
    if np.linalg.matrix_rank(design) < 3:
        raise ValueError("rank-deficient fit: diameters do not span the basis")
    coeffs = []
    rss = []
    for region in range(3):
        y = np.array([medians[d][region] for d in diameters])
        sol, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
        resid = y - design @ sol
        coeffs.append(tuple(float(c) for c in sol))
        rss.append(float(resid @ resid))
    return FitModel(basis=basis, coefficients=tuple(coeffs),
                    residual_rss=tuple(rss),
                    diameters=tuple(float(d) for d in diameters))


def fit_to_dict(model: FitModel) -> dict:
    return {"basis": model.basis,
            "coefficients": [list(c) for c in model.coefficients],
            "residual_rss": list(model.residual_rss),
            "diameters_m": list(model.diameters)}


def fit_from_dict(data: dict) -> FitModel:
    return FitModel(basis=data["basis"],
                    coefficients=tuple(tuple(c) for c in data["coefficients"]),
                    residual_rss=tuple(data["residual_rss"]),
                    diameters=tuple(data["diameters_m"]))


@dataclass(frozen=True)
class ReplayReport:
    """Dynamic-versus-constant comparison over a matched scenario grid."""

    success_dynamic: float
    success_constant: float
    mean_rel_gap: tuple            # per region, mean |dyn - fit| / dyn
    gap_by_diameter: dict          # d_p -> (gap_g1, gap_g2, gap_g3)
    dynamic_medians: dict          # d_p -> (g1, g2, g3)
    predicted: dict                # d_p -> (g1, g2, g3)
    failures_by_diameter: dict     # d_p -> count of non-desired outcomes
    total_failures: int


def replay_comparison(dynamic_results, constant_results,
                      fit: FitModel) -> ReplayReport:
    """Compare fresh dynamic medians with fit predictions and score both runs.

    Requires the two result lists to cover the same scenarios in the same
    order (same grid replayed in the other mode).
    """
    if len(dynamic_results) != len(constant_results):
        raise ValueError("result grids have different sizes")
    for a, b in zip(dynamic_results, constant_results):
        if ((a.d_p, a.artery, a.u_max, a.entrance_index, a.upstream_k,
             a.downstream_k)
                != (b.d_p, b.artery, b.u_max, b.entrance_index, b.upstream_k,
                    b.downstream_k)):
            raise ValueError("result grids do not match scenario-for-scenario")
    dyn_meds = medians_by_diameter(dynamic_results)
    predicted = {d: fit.predict(d) for d in dyn_meds}
    gaps = {}
    for d, meds in dyn_meds.items():
        gaps[d] = tuple(abs(m - p) / m if m else math.nan
                        for m, p in zip(meds, predicted[d]))
    mean_gap = tuple(
        float(np.mean([gaps[d][region] for d in gaps])) for region in range(3))
    failures = {}
    total = 0
    for r in constant_results:
        if r.outcome != "desired":
            failures[r.d_p] = failures.get(r.d_p, 0) + 1
            total += 1
    from .sweep import navigation_success
    return ReplayReport(
        success_dynamic=navigation_success(dynamic_results),
        success_constant=navigation_success(constant_results),
        mean_rel_gap=mean_gap, gap_by_diameter=gaps,
        dynamic_medians=dyn_meds, predicted=predicted,
        failures_by_diameter=failures, total_failures=total)


def replay_report_text(report: ReplayReport) -> str:
    lines = [
        f"navigation success  dynamic: {report.success_dynamic:.4f}  "
        f"constant: {report.success_constant:.4f}",
        f"constant-mode failures: {report.total_failures}",
        "mean relative gap fit vs dynamic medians: "
        + "  ".join(f"G{i + 1} {g * 100:.1f}%"
                    for i, g in enumerate(report.mean_rel_gap)),
        "per-diameter medians (dynamic | fit | gap):",
    ]
    for d in sorted(report.dynamic_medians):
        meds = report.dynamic_medians[d]
        pred = report.predicted[d]
        gap = report.gap_by_diameter[d]
        cells = "  ".join(
            f"G{i + 1} {meds[i]:.4f}|{pred[i]:.4f}|{gap[i] * 100:.1f}%"
            for i in range(3))
        fails = report.failures_by_diameter.get(d, 0)
        lines.append(f"  d={d * 1e6:7.1f} um  {cells}  failures={fails}")
    return "\n".join(lines) + "\n"
