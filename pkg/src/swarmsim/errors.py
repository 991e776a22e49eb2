"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised when inputs violate a construction or call contract."""


class SchemaError(ValueError):
    """Raised when a record fails schema validation.

    Carries the offending field name so callers can report it.
    """

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
