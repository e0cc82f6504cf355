"""Marchenko-Pastur asymptotics of Daniell smoothed periodograms of linear processes."""

from .measures import DiscreteMeasure, bl_distance, esd, stieltjes
from .mpsolver import MPSolution, NonConvergenceError, discretize, mp_density, mp_solve, nu_n
from .process import LinearProcessModel, make_rotating_ma, simulate, white_noise
from .spectral import daniell_avg, daniell_matrix, grid_index

__all__ = [
    "DiscreteMeasure",
    "LinearProcessModel",
    "MPSolution",
    "NonConvergenceError",
    "bl_distance",
    "daniell_avg",
    "daniell_matrix",
    "discretize",
    "esd",
    "grid_index",
    "make_rotating_ma",
    "mp_density",
    "mp_solve",
    "nu_n",
    "simulate",
    "stieltjes",
    "white_noise",
]

__version__ = "0.1.0"
