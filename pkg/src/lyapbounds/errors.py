"""Exception taxonomy shared by the library and the CLI.

Exit codes follow the CLI contract: 0 success, 2 validation failure,
3 assumption/structural failure, 4 sandwich violation, 5 numeric failure.
"""

from __future__ import annotations


class LyapBoundsError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ValidationError(LyapBoundsError):
    """Malformed or inconsistent inputs (configs, dims, probabilities)."""

    exit_code = 2


class DimensionMismatch(ValidationError):
    pass


class EmptyLabel(ValidationError):
    """A sparsity label with no nonzero bit."""

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"label {index + 1} is the zero mask")


class OverlappingLabels(ValidationError):
    """Two sparsity labels share a support bit."""

    def __init__(self, i: int, j: int):
        self.i, self.j = i, j
        super().__init__(f"labels {i + 1} and {j + 1} have overlapping supports")


class UncoveredEntry(ValidationError):
    """A matrix entry is nonzero outside the union of label supports."""

    def __init__(self, row: int, col: int):
        self.row, self.col = row, col
        super().__init__(f"nonzero entry at ({row}, {col}) not covered by any label")


class AssumptionError(LyapBoundsError):
    """A mathematical hypothesis or operation precondition fails."""

    exit_code = 3


class StructuralViolation(AssumptionError):
    pass


class MissingLoopExponent(AssumptionError):
    pass


class EmptyW(AssumptionError):
    pass


class DisjointnessViolation(AssumptionError):
    pass


class NonnegativityUnverified(AssumptionError):
    pass


class CommutationViolated(AssumptionError):
    def __init__(self, atom_index: int, residual: float):
        self.atom_index = atom_index
        self.residual = residual
        super().__init__(
            f"base/update commutation fails on atom {atom_index} "
            f"(relative residual {residual:.3e})"
        )


class SingularBase(AssumptionError):
    pass


class RankDeficientV(AssumptionError):
    pass


class RankOutOfRange(AssumptionError):
    pass


class ZeroDiagonalEntry(AssumptionError):
    def __init__(self, atom_index: int, coord: int):
        self.atom_index = atom_index
        self.coord = coord
        super().__init__(f"atom {atom_index} has zero diagonal entry at coordinate {coord}")


class SandwichViolated(LyapBoundsError):
    """Monte Carlo estimate escaped the asserted bound interval."""

    exit_code = 4


class NumericError(LyapBoundsError):
    exit_code = 5


class SingularCollapse(NumericError):
    """Running product collapsed to the zero matrix."""


class RankCollapse(NumericError):
    """A QR step produced an exactly zero diagonal entry."""


class SingularSample(NumericError):
    """A non-invertible sample where invertibility is required."""


class VertexBudgetExceeded(NumericError):
    pass


class BudgetExceeded(NumericError):
    pass
