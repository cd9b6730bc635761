"""Exception types shared across the package."""


class TsddeError(Exception):
    """Base class for every error raised by this package."""

    code = "Error"


# time scales
class NotInScale(TsddeError, ValueError):
    code = "NotInScale"


class HorizonExceeded(TsddeError, ValueError):
    code = "HorizonExceeded"


class ReversedBounds(TsddeError, ValueError):
    code = "ReversedBounds"


class DegenerateScale(TsddeError, ValueError):
    code = "DegenerateScale"


# expressions
class ExprSyntaxError(TsddeError, ValueError):
    """Parse failure. Carries 1-based line and column of the offending token."""

    code = "SyntaxError"

    def __init__(self, message, line=1, column=1):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class UnknownIdentifier(ExprSyntaxError):
    code = "UnknownIdentifier"


class EvalError(TsddeError, ArithmeticError):
    code = "EvalError"


# exponential function
class NotRegressive(TsddeError, ArithmeticError):
    code = "NotRegressive"

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


# delay equations
class DelayAheadError(TsddeError, ValueError):
    code = "DelayAheadError"


class LookupBeforeHistory(TsddeError, ValueError):
    code = "LookupBeforeHistory"


class NegativeCoefficient(TsddeError, ValueError):
    code = "NegativeCoefficient"


class MissingFieldSample(TsddeError, KeyError):
    code = "MissingFieldSample"

    def __str__(self):
        return str(self.args[0]) if self.args else ""


# stability
class NotStrict(TsddeError, ValueError):
    code = "NotStrict"


class NoBracket(TsddeError, ArithmeticError):
    code = "NoBracket"


class BadTheta(TsddeError, ValueError):
    code = "BadTheta"


# cli
class UnknownExample(TsddeError, KeyError):
    code = "UnknownExample"

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ConfigError(TsddeError, ValueError):
    code = "ConfigError"

