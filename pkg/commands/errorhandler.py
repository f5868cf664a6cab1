from utils.command import Extension, Subcommand
from utils.errors import *

import sys


EXIT_UNKNOWN = 1
EXIT_ARGUMENT = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class ErrorHandler(Extension, name='ErrorHandler'):
    def describe(self, exc: Exception) -> tuple:
        if isinstance(exc, DivisibilityViolation):
            return (
                f'Generic CPF needs N divisible by M, got N = {exc.n} and M = {exc.m}.',
                EXIT_ARGUMENT,
            )

        elif isinstance(exc, UnknownTarget):
            return f"Unknown target or model '{exc.name}'.", EXIT_ARGUMENT

        elif isinstance(exc, ProvenanceMismatch):
            return (
                f'This operation is not available for {exc.provenance} summaries.',
                EXIT_ARGUMENT,
            )

        elif isinstance(exc, ArgumentError):
            return str(exc), EXIT_ARGUMENT

        elif isinstance(exc, ParseError):
            return f'Could not parse input at line {exc.line}: {exc.reason}', EXIT_DATA

        elif isinstance(exc, DimensionMismatch):
            return (
                f'Dimension mismatch: expected {exc.expected}, got {exc.got}.',
                EXIT_DATA,
            )

        elif isinstance(exc, (DataError, FileNotFoundError)):
            return str(exc), EXIT_DATA

        elif isinstance(exc, AllWeightsZero):
            return (
                f'All {exc.n} weights are zero, nothing left to estimate with.',
                EXIT_NUMERICAL,
            )

        elif isinstance(exc, CovarianceNotSPD):
            return (
                f'Region {exc.region} has a covariance that is not positive definite, try a larger --reg-eps.',
                EXIT_NUMERICAL,
            )

        elif isinstance(exc, NumericalError):
            return str(exc), EXIT_NUMERICAL

        return f'An unknown error occurred: {str(exc) or type(exc).__name__}', EXIT_UNKNOWN

    def on_command_error(self, command: Subcommand, exc: Exception) -> int:
        message, code = self.describe(exc)
        if code == EXIT_UNKNOWN:
            self.cli.logger.exception(f'Command `{command.name}` failed.', exc_info=exc)

        print(f'[ERROR] {message}', file=sys.stderr)
        return code


def setup(cli):
    cli.add_extension(ErrorHandler(cli))
