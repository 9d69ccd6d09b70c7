"""Correlation-derived graph representations of grayscale images.

Edges come from clustering lagged correlations between image rows (or
columns); the Cartesian product of the two factor graphs gives one node per
pixel.  A small GCN scores how well each representation separates classes.
"""

__version__ = "0.1.0"
