"""Reachability, control synthesis and monotones for Markovian thermal processes."""

__version__ = "0.1.0"
