"""Exception hierarchy shared by every normheat module.

Each class carries the process exit code the CLI uses when the error escapes
a scenario: 1 for configuration/usage problems, 2 for violated regimes and
preconditions, 3 for numerical failures.
"""

from __future__ import annotations

from typing import Any, Optional, Sequence


class NormHeatError(RuntimeError):
    exit_code = 3


class ConfigError(NormHeatError):
    exit_code = 1

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__('; '.join(self.problems) or 'invalid configuration')


class PreconditionError(NormHeatError):
    exit_code = 2


class RegimeError(PreconditionError):
    """Parameters outside the (g, sigma, d) regime an operation is defined for."""


class GridError(PreconditionError):
    pass


class FieldError(PreconditionError):
    pass


class DegenerateField(PreconditionError):
    """The zero field was passed where the flow or a quotient needs u != 0."""


class BadBracket(PreconditionError):
    pass


class TraceError(PreconditionError):
    """A diagnostics trace cannot support the requested check."""


class NumericalFailure(NormHeatError):
    exit_code = 3


class Diverged(NumericalFailure):
    pass


class NotConverged(NumericalFailure):
    def __init__(self, message: str, trace: Optional[Sequence[Any]] = None):
        super().__init__(message)
        self.trace = tuple(trace) if trace is not None else ()


class ShootingError(NumericalFailure):
    def __init__(self, message: str, suggested_r_max: Optional[float] = None):
        if suggested_r_max is not None:
            message = f'{message} (try R_max >= {suggested_r_max:g})'
        super().__init__(message)
        self.suggested_r_max = suggested_r_max
