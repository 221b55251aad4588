"""Nodal interior-penalty RKDG solver for the 2D compressible Navier-Stokes
equations on triangular meshes, weakly coupled to a 1-DOF elastically mounted
rigid body."""

__version__ = "0.1.0"
