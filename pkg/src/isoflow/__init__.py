"""Weak synchronization diagnostics for isotropic flows via the two-point distance diffusion."""

__version__ = "0.1.0"
