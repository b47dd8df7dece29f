"""Utility functions for semreid."""

from semreid.utils.rng import derive_seed, make_rng

__all__ = ["derive_seed", "make_rng"]
