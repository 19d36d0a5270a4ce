#!/usr/bin/env python3
"""
Error Types for the NLRE Toolkit
Validation errors map to CLI exit code 2, certification failures to exit code 3
"""

from typing import Any, Dict, Optional


class NLREError(Exception):
    """Base class for toolkit errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}


class ConfigValidationError(NLREError, ValueError):
    """Scenario configuration failed schema or parameter validation."""


class CertificationError(NLREError, RuntimeError):
    """A numerical result could not be certified."""


class TruncationError(CertificationError):
    """Population or norm leaked into the top Fock levels."""


class NoCrossingError(CertificationError):
    """The Rabi profiles have no stabilizing crossing."""


class EigensolverError(CertificationError):
    """Iterative eigensolver did not converge."""


class GridError(CertificationError):
    """A position or phase-space grid is too small or too coarse."""
