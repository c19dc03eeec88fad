"""Four-sided pong and single-population NEAT."""

__version__ = "0.1.0"
