"""Exception classes shared across the package.

Exit-code mapping used by the CLI: InputError subclasses -> 2,
ConfigError subclasses -> 3, anything else -> 4.
"""


class TabfpError(Exception):
    """Base class for all package errors."""


class InputError(TabfpError):
    """Bad input data (files, matrices, vectors)."""


class ConfigError(TabfpError):
    """Invalid configuration or flag combination."""


# --- ingestion ---

class EmptyFileError(InputError):
    pass


class NoNumericColumnsError(InputError):
    pass


class DuplicateHeaderError(InputError):
    pass


# --- numeric kernels ---

class NonFiniteError(InputError):
    pass


class AllMissingColumnError(InputError):
    pass


class EmptySpectrumError(InputError):
    pass


class EmptyVectorError(InputError):
    pass


class TooShortError(InputError):
    pass


class DegenerateDesignError(InputError):
    pass


# --- privacy ---

class MissingBoundsError(ConfigError):
    pass


# --- serialization ---

class UnknownMeasureError(ConfigError):
    pass


# --- embedding / similarity ---

class ServiceUnavailableError(TabfpError):
    pass


class DimensionMismatchError(InputError):
    pass


class DegenerateViewError(InputError):
    pass


class ProviderMismatchError(InputError):
    pass


class InfeasiblePenaltyError(ConfigError):
    pass


# --- catalog / evaluation ---

class CorruptEntryError(InputError):
    pass


class MissingTruthError(InputError):
    pass
