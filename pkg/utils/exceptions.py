"""
Error hierarchy shared by every app.
"""


class VerifierError(Exception):
    """Base class for all verifier failures."""


class ExpressionSyntaxError(VerifierError):
    """Raised when a dynamics expression does not match the grammar."""

    def __init__(self, message, position):
        super().__init__(f'{message} at position {position}')
        self.position = position


class DomainError(VerifierError):
    """An elementary function or division left its natural domain."""


class RootIsolationError(VerifierError):
    """Root isolation hit its subdivision limit."""


class TriangulationError(VerifierError):
    pass


class BoundingSetError(VerifierError):
    """Invalid bounding-set operation; `point` names the offending grid point."""

    def __init__(self, message, point=None):
        if point is not None:
            message = f'{message} (grid point {tuple(float(v) for v in point)})'
        super().__init__(message)
        self.point = point


class ModelError(VerifierError):
    pass


class SolverError(VerifierError):
    pass


class SolverConfigurationError(SolverError):
    pass


class SolutionParseError(SolverError):
    def __init__(self, line_number, line):
        super().__init__(f'Cannot parse solution line {line_number}: {line!r}')
        self.line_number = line_number
        self.line = line


class InfeasibleModelError(SolverError):
    """A reachability model was infeasible, which means an encoding bug."""


class NetworkFormatError(VerifierError):
    def __init__(self, message, offset):
        super().__init__(f'{message} at byte offset {offset}')
        self.offset = offset


class ConfigurationError(VerifierError):
    """
    Benchmark config failed validation. `errors` maps dotted field paths
    to lists of messages.
    """

    def __init__(self, errors):
        self.errors = errors
        lines = [f'{path}: {"; ".join(messages)}' for path, messages in errors.items()]
        super().__init__('Invalid configuration:\n  ' + '\n  '.join(lines))
