"""Numerical laboratory for radially symmetric Navier-Stokes-Poisson flow with doping."""

from .model import (DopingError, DopingProfile, Params, RadialGrid, State, doping_from_spec,
                    make_grid, make_params, surface_area)

__version__ = "0.1.0"

__all__ = [
    "DopingError", "DopingProfile", "Params", "RadialGrid", "State",
    "doping_from_spec", "make_grid", "make_params", "surface_area",
]
