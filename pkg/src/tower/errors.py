"""Exception types shared across the package."""


class TowerError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TowerError):
    """Invalid configuration value or unknown configuration key."""


class DomainError(TowerError):
    """Argument outside the mathematical domain of an operation."""


class ContractError(TowerError):
    """A caller violated an operation's precondition."""


class DataError(TowerError):
    """Malformed, inconsistent, or out-of-range input data."""


class FormatError(DataError):
    """A serialized artifact does not match its documented layout."""


class StratificationError(DataError):
    """A class disappeared while subsampling labelled data."""


class MetricError(DataError):
    """A metric is undefined for the given inputs."""


class UsageError(TowerError):
    """API called out of order or with missing prerequisites."""


class NumericError(TowerError):
    """A numeric guard tripped: non-finite values, zero norms, NaN loss."""
