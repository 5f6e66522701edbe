"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class InconsistentObservation(ValueError):
    """An observed history has zero probability under every candidate law."""

    def __init__(self, message, prefix=None):
        super().__init__(message)
        self.prefix = tuple(prefix) if prefix is not None else None


class ConfigError(ValueError):
    """An experiment configuration failed validation.

    ``errors`` holds one ``(field, message)`` pair per violated field.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        fields = ", ".join(f for f, _ in self.errors)
        super().__init__(f"invalid configuration: {fields}")
