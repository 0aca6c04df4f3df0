"""Numerical helpers shared across the package."""
