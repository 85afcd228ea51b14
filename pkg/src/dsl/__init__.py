"""Self-similar decomposition spaces of the 3-sphere: geometry, Semmes metrics,
modulus estimates, circulation evidence, branch data and ellipticity verdicts."""

__version__ = "0.1.0"
