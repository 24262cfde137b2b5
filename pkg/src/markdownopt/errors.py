"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid user input: malformed data, bad configuration, broken invariants."""


class CapExceededError(InputError):
    """A configured size cap (enumeration, LP rows, oracle product) was exceeded."""


class NumericalError(RuntimeError):
    """The numerical core failed: simplex breakdown or a violated bound sandwich."""
