"""Magnetic navigation of microrobots through idealized artery bifurcations.

A numpy-based toolkit that simulates magnetically steered spherical
microrobots in steady non-Newtonian blood flow through Y-bifurcations,
computes the magnetic field gradients navigation demands (per step, or as
constant per-region values), sweeps full-factorial scenario grids, and fits
predictive equations for the required gradients versus robot diameter.
"""

from .geometry import (ARTERY_PRESETS, BifurcationGeometry, TargetPlan,
                       centerline_arc, classify_region, entrance_positions,
                       geometry_from_config, make_geometry,
                       murray_branch_diameter, place_targets, wall_distance)
from .hemodynamics import (AnalyticBifurcationFlow, CarreauModel, FlowField,
                           GridField, analytic_bifurcation_flow,
                           apparent_viscosity, inlet_profile, load_grid_field,
                           profile_flux, write_grid_field)
from .dynamics import (Microrobot, ParticleState, drive_acceleration,
                       gravity_vector, load_magnetization_curve,
                       reflect_velocity, relaxation_time, resolve_collision,
                       settling_velocity, step_position, step_velocity,
                       time_step)
from .control import (ConstantMode, DynamicMode, GradientCommand,
                      RegionStats, TrajectoryRecord, constant_gradient,
                      gravity_hold_gradient, magnetic_force, next_waypoint,
                      required_gradient, run_trajectory)
from .sweep import (ScenarioResult, ScenarioSpec, SweepSettings,
                    design_table2, design_table4, factorial_grid,
                    load_results_csv, navigation_success, run_sweep,
                    write_results_csv)
from .analysis import (BoxplotStats, FitModel, ReplayReport, boxplot_stats,
                       fit_predictive_equations, gradient_maps,
                       median_ratio_table, medians_by_diameter,
                       replay_comparison)

__version__ = "0.1.0"
