"""Finite element laboratory for the perfect-conductor field between two nearly
touching inclusions (or an inclusion near the outer boundary)."""
from .geometry import (BOUNDARY, TWO_INCLUSIONS, BoundaryData, CoefficientField, GapProfile, Region,
                       Scene, build_scene, load_scene, scene_from_json, validate_assumptions)
from .mesh import GradingPolicy, Mesh, mesh_quality_report, triangulate_scene
from .harmonic import (DirichletProblem, FieldSolution, HarmonicSystem, energy_inner_product,
                       solve_dirichlet)
from .capacitance import (ConductorSolution, FluxMatrix, direct_constrained_solve, flux_matrix,
                          result_record, solve_scene)
from .auxiliary import AuxiliaryField, compare_gradients, corrector_residual, local_energy
from .asymptotics import (SweepPlan, SweepRecord, RateFit, capacitance_oracle, fit_power, fit_rate,
                          rho_n, rho_n_m, run_sweep)

__version__ = "0.1.0"
