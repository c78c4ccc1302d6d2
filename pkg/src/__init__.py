"""Multi-type synchronous exclusion process on an open lattice."""

__version__ = "0.1.0"
