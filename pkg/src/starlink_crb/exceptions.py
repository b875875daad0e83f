"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration value. ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class StationCatalogError(ValueError):
    """Malformed or inconsistent ground-station catalog."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class DegenerateGeometryError(ValueError):
    """Two nodes that should be ranged against each other coincide."""


class SummaryError(ValueError):
    """No usable (non-degenerate) values to summarise."""
