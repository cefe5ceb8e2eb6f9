"""Generation and transmission expansion planning for offshore grids under nodal and zonal markets."""

__version__ = "0.1.0"
