"""rigidfold: rigid-origami crease pattern design as a discrete optimization game."""

__version__ = "0.1.0"
