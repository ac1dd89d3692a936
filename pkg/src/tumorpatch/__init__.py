"""Congested tumor growth with nutrient: a Wasserstein-projection scheme,
its obstacle-problem reformulation, master dynamics and patch geometry."""

from .grid import GridSpec, ScalarField, ball, balls, constant, lobed
from .ot_projection import ProjectionResult, ctransform, project
from .scheme import RunResult, SchemeParams, SimState, run
from .elliptic import evolve_elliptic, obstacle_solve, stationary_solve
from .master import m_of_t, run_hs_potential, run_hs_source, t_of_m

__all__ = [
    "GridSpec", "ScalarField", "ball", "balls", "constant", "lobed",
    "ProjectionResult", "ctransform", "project",
    "RunResult", "SchemeParams", "SimState", "run",
    "evolve_elliptic", "obstacle_solve", "stationary_solve",
    "m_of_t", "run_hs_potential", "run_hs_source", "t_of_m",
]

__version__ = "0.1.0"
