"""Inscribed trefoil hexagons in knotted curves of S^3 and R^3."""

__version__ = "0.1.0"
