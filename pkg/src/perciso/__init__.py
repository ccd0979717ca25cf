"""Isoperimetry of supercritical planar percolation clusters, numerically."""
from . import boundary_norm, cheeger, continuum, geometry, harness, lattice, rightmost

__all__ = ["boundary_norm", "cheeger", "continuum", "geometry", "harness", "lattice", "rightmost"]
__version__ = "0.1.0"
