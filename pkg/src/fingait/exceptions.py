class ConfigurationError(ValueError):
    """Raised when weights, configs or solver options are inconsistent."""
