"""
Exception hierarchy for jordangap.
Every error carries the name of the check it belongs to and the process exit
code the CLI reports for it (1 = numerical failure, 2 = invalid input).
"""

from typing import Optional


class JordanGapError(Exception):
    """Base class for all library errors."""

    exit_code: int = 1
    check: str = "jordangap"

    def __init__(self, message: str, check: Optional[str] = None):
        super().__init__(message)
        if check is not None:
            self.check = check

    @property
    def detail(self) -> str:
        return f"{self.check}: {self}"


# =============================================
# INPUT ERRORS (exit 2)
# =============================================

class ParameterError(JordanGapError, ValueError):
    """A parameter is outside its admissible range."""
    exit_code = 2
    check = "parameter"


class SizeError(JordanGapError, ValueError):
    """Too few modes, grid points or samples."""
    exit_code = 2
    check = "size"


class ShapeError(JordanGapError, ValueError):
    """Array length does not match the ladder."""
    exit_code = 2
    check = "shape"


class GapIndexError(JordanGapError, IndexError):
    exit_code = 2
    check = "gap_index"


class DegenerateGapError(ParameterError):
    """λ_n >= λ_{n+1}: no gap to work with."""
    check = "degenerate_gap"


class SupportError(JordanGapError, ValueError):
    """Low-mode data has nonzero high-mode entries."""
    exit_code = 2
    check = "support"


# =============================================
# NUMERICAL FAILURES (exit 1)
# =============================================

class ResonanceError(JordanGapError, ArithmeticError):
    """θ coincides with an eigenvalue."""
    check = "resonance"


class DivergenceError(JordanGapError, ArithmeticError):
    """NaN or overflow during time integration."""
    check = "divergence"

    def __init__(self, message: str, step: int = -1, time: float = float("nan"),
                 check: Optional[str] = None):
        super().__init__(message, check)
        self.step = step
        self.time = time


class NoContractionError(JordanGapError, ArithmeticError):
    """Fixed-point iteration failed to contract."""
    check = "contraction"

    def __init__(self, message: str, rate: float = float("nan"), iteration: int = -1,
                 check: Optional[str] = None):
        super().__init__(message, check)
        self.rate = rate
        self.iteration = iteration


class InconclusiveError(JordanGapError):
    """The numerics cannot decide (e.g. no separable complex pair)."""
    check = "inconclusive"
