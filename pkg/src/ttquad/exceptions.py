"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Shapes, ranks or dimensions are inconsistent."""


class SizeError(ValueError):
    """A dense materialization would exceed the configured element cap."""


class NumericalError(ArithmeticError):
    """A linear-algebra kernel failed to converge."""


class NonFiniteError(FloatingPointError):
    """The integrand returned NaN or infinity at a sample point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class BudgetExhausted(RuntimeError):
    """The evaluation budget does not exceed the cost of the test sweep."""


def with_context(exc: BaseException, context: str) -> BaseException:
    """Copy of ``exc`` with ``context`` appended to its message, keeping its attributes.

    Returns ``exc`` itself when its type cannot be rebuilt from a single message.
    """
    try:
        new = type(exc)(f"{exc} ({context})")
    except Exception:
        return exc
    new.__dict__.update(exc.__dict__)
    return new
