"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid argument values or incompatible shapes."""


class ValidationError(InputError):
    """Data read from disk violates a documented contract."""


class ConfigError(InputError):
    """Configuration that cannot produce a valid processing chain."""


class FormatError(RuntimeError):
    """A file is structurally malformed (bad magic, truncation, ...)."""
