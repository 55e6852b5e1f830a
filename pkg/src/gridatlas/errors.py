"""Exception hierarchy and CLI exit codes."""

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4
EXIT_NETWORK = 5
EXIT_INTEGRITY = 6
EXIT_MANUAL_STEP = 9


class GridAtlasError(Exception):
    exit_code = EXIT_INPUT


# --- input / parsing -------------------------------------------------------

class ParseError(GridAtlasError):
    """Malformed header line in a grid file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class LexicalError(ParseError):
    """Token that is not a number."""

    def __init__(self, message, line=None, column=None):
        self.column = column
        if column is not None:
            message = f"{message} (column {column})"
        super().__init__(message, line)


class StructuralError(GridAtlasError):
    pass


class UnsupportedFeatureError(GridAtlasError):
    def __init__(self, message, index=None):
        self.index = index
        if index is not None:
            message = f"feature {index}: {message}"
        super().__init__(message)


class GeometryError(GridAtlasError):
    pass


class MissingInputError(GridAtlasError):
    pass


class JoinError(GridAtlasError):
    def __init__(self, message, missing=()):
        self.missing = tuple(missing)
        super().__init__(message)


# --- parameters / contracts ------------------------------------------------

class ParameterError(GridAtlasError, ValueError):
    exit_code = EXIT_PARAMETER


class BoundsError(ParameterError, IndexError):
    pass


class EmptyDomainError(ParameterError):
    pass


class WrongKindError(ParameterError):
    pass


class UnreachableShareError(ParameterError):
    pass


class DegenerateClassesError(ParameterError):
    pass


class DomainError(ParameterError):
    pass


class InvalidParamsError(ParameterError):
    pass


class CompositionError(ParameterError):
    pass


class ValidationError(ParameterError):
    def __init__(self, message, fields=()):
        self.fields = tuple(fields)
        if self.fields:
            message = f"{message}: {', '.join(self.fields)}"
        super().__init__(message)


# --- runtime -----------------------------------------------------------------

class NumericalFailureError(GridAtlasError, ArithmeticError):
    exit_code = EXIT_NUMERICAL

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} at step {step}"
        super().__init__(message)


class NetworkError(GridAtlasError):
    exit_code = EXIT_NETWORK

    def __init__(self, message, status=None):
        self.status = status
        super().__init__(message)


class IntegrityError(GridAtlasError):
    exit_code = EXIT_INTEGRITY
