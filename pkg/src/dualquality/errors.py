"""Exception taxonomy shared across the package."""


class ArgumentError(ValueError):
    """A caller-supplied argument violates an operation's precondition."""


class StateError(RuntimeError):
    """An operation was invoked against state it cannot work with."""


class IntegrityError(ValueError):
    """Stored or merged data violates a structural invariant (e.g. duplicate ids)."""


class ParseError(ValueError):
    """Input text or a serialized record could not be parsed."""


class BackendError(RuntimeError):
    """A pluggable backend (lemmatizer, embedding model, remote client) failed."""


class NumericalError(RuntimeError):
    """Training produced a non-finite quantity."""


class TransportError(RuntimeError):
    """A remote call failed after exhausting its retry budget."""
