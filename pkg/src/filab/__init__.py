"""Numerical laboratory for Fourier-Independent distributions and the
two-query subset/Fourier verifier."""

__version__ = "0.1.0"
