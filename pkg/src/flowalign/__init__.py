"""flowalign: align image sequences by min-cut surfaces in a 3D flow network."""

__version__ = "0.1.0"
