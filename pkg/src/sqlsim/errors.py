"""Exception hierarchy.

Every error carries a short ``kind`` tag so the command-line front end can
report it on one machine-parsable line, and an ``exit_code`` that groups
failures into configuration (2) and numerical (3) problems.
"""


class SqlsimError(Exception):
    kind = "Error"
    exit_code = 3

    def __init__(self, message="", **fields):
        super().__init__(message)
        self.fields = fields

    def __str__(self):
        return self.args[0] if self.args else self.kind


class ConfigError(SqlsimError):
    exit_code = 2


class NumericalError(SqlsimError):
    exit_code = 3


class NonPositive(ConfigError, ValueError):
    kind = "NonPositive"

    def __init__(self, field, value=None):
        super().__init__(f"{field} must be positive (got {value!r})", field=field)
        self.field = field


class InconsistentDTS(ConfigError, ValueError):
    kind = "InconsistentDTS"


class StepTooLarge(ConfigError, ValueError):
    kind = "StepTooLarge"


class WindowTooShort(ConfigError, ValueError):
    kind = "WindowTooShort"


class RecordTooShort(ConfigError, ValueError):
    kind = "RecordTooShort"


class GridEmpty(ConfigError, ValueError):
    kind = "GridEmpty"


class UnknownKey(ConfigError, KeyError):
    kind = "UnknownKey"


class TypeMismatch(ConfigError, TypeError):
    kind = "TypeMismatch"


class MissingRequired(ConfigError, ValueError):
    kind = "MissingRequired"


class NoConvergence(NumericalError, ArithmeticError):
    kind = "NoConvergence"


class DegenerateDenominator(NumericalError, ZeroDivisionError):
    kind = "DegenerateDenominator"


class TooFewTrajectories(NumericalError, ValueError):
    kind = "TooFewTrajectories"
