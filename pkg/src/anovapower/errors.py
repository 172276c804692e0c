"""Exception hierarchy.

Every error raised on bad input derives from :class:`AnovaPowerError`, which
is itself a :class:`ValueError`, so callers that only care about "bad input"
can catch the builtin.
"""


class AnovaPowerError(ValueError):
    """Base class for all input and validation errors."""


class DomainError(AnovaPowerError):
    """Argument outside the mathematical domain of a function."""


class FormulaError(AnovaPowerError):
    """A model formula could not be tokenized or parsed."""

    def __init__(self, message, formula="", position=None):
        self.formula = formula
        self.position = position
        if position is not None:
            message = f"{message} at position {position}: {formula!r}"
        super().__init__(message)


class StructuralError(AnovaPowerError):
    """A well-formed formula describing a model outside the catalog."""


class UnsupportedModelError(AnovaPowerError):
    """The requested operation is not defined for this model."""


class MissingParameterError(AnovaPowerError):
    """A design does not supply a level count the model needs."""


class ConstraintError(AnovaPowerError):
    """Fixed effects violate the zero-margin identifiability constraints."""


class InfeasibleError(AnovaPowerError):
    """A sample-size request cannot be met by any admissible design."""
