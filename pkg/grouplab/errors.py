from typing import Optional

# Process exit codes
EXIT_OK = 0
EXIT_GATING_FAILURE = 1
EXIT_USAGE = 2


class LabError(Exception):
    """Base error carrying a process exit code and a detail message"""

    exit_code: int = EXIT_USAGE

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code

    def __str__(self) -> str:
        return self.detail


class UsageError(LabError):
    """Bad command line (unknown suite, missing argument)"""


class ConfigError(LabError):
    """Configuration failed validation; lists every problem"""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("Invalid configuration:\n  " + "\n  ".join(self.problems))


# Group construction
class CayleyParseError(LabError):
    """Malformed Cayley-table file"""


class GroupValidationError(LabError):
    """Table violates a group invariant"""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}" if detail else invariant)


class CatalogError(LabError):
    """Irrep catalog missing, malformed or inconsistent with its group"""


class UnknownIrrepError(CatalogError):
    """Irrep id not present in the catalog"""


# Tasks
class SplitError(LabError):
    """Split parameters produce an unusable dataset"""


class WeightError(LabError):
    """Invalid per-row weights"""


# Numerics
class NumericError(LabError):
    """Numerical kernel failure"""


class ShapeError(NumericError):
    """Operand shapes do not chain"""


class NotSymmetricError(NumericError):
    """Matrix expected symmetric"""


class NotPositiveDefiniteError(NumericError):
    """Cholesky factorization failed"""


class SingularSystemError(NumericError):
    """Linear system has no unique solution"""


class ZeroGradientError(NumericError):
    """Polar factor of an all-zero matrix is undefined"""


class NonFiniteError(NumericError):
    """NaN or inf encountered"""


class UnconvergedError(NumericError):
    """Operation requires a converged ascent result"""


class GatingFailure(LabError):
    """At least one gating verification check failed"""

    exit_code = EXIT_GATING_FAILURE
