"""Simulation of three-party detectable broadcast over qutrit triplets."""

from .players import BOTTOM, PLAYERS, Player

__version__ = "0.1.0"

__all__ = ["BOTTOM", "PLAYERS", "Player", "__version__"]
