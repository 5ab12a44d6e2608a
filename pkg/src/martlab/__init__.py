"""Martingale transforms of Brownian motion: checks, classifiers and heat-polynomial algebra."""

__version__ = "0.1.0"
