"""Exception hierarchy shared across the package."""


class EstLoraError(Exception):
    """Base class for all errors raised by this package."""


class InputError(EstLoraError):
    """Invalid user input: malformed files, bad values, contract violations.

    The CLI maps this to exit code 2.
    """


class AdapterFormatError(InputError):
    """A weight container could not be parsed or violates the format."""


class AlignmentError(InputError):
    """Two adapters cannot be aligned onto a shared layer set."""


class EmbeddingError(InputError):
    """An embedding file is malformed or numerically unusable."""


class GateConfigError(InputError):
    """A gate configuration value is out of its allowed range."""
