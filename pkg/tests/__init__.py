"""
Test package for the Jackson flows project.

Tests use pytest with small fixed networks (see conftest.py); the heavy
Monte Carlo acceptance runs are marked `slow`.
"""

__all__ = []
