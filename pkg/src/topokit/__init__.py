"""Topology kernels for 2D/3D image grids."""
