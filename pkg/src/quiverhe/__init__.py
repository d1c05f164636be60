"""Quiver-bundle stability laboratory: exact (alpha, sigma, tau)-stability
classification, chamber analysis in tau-space, and a numerical solver for
the coupled Hermitian-Einstein equations on the sphere fixture."""

__version__ = "0.1.0"
