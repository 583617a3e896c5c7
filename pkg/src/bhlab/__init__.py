"""Numerical laboratory for unstable self-similar blowup of u_t + u u_x = H[u]."""
from .errors import BHLabError
from .grid import Field, Grid1D
from .hilbert import HilbertMethod
from .initdata import InitConfig, build_initial_physical
from .evolve import EvolveConfig, Trajectory, run
from .shooting import ShootConfig, shoot_sequence
from .diagnostics import RunReport, analyze_run

__all__ = ["BHLabError", "Field", "Grid1D", "HilbertMethod", "InitConfig",
           "build_initial_physical", "EvolveConfig", "Trajectory", "run", "ShootConfig",
           "shoot_sequence", "RunReport", "analyze_run"]
__version__ = "0.1.0"
