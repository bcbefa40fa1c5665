"""Exception hierarchy.

Every error carries a short ``category`` string; the CLI prints it and exits
nonzero so shell pipelines can branch on the failure kind.
"""


class MomentKitError(Exception):
    category = "error"


class DegenerateInputError(MomentKitError, ValueError):
    category = "degenerate-input"


class DimensionError(MomentKitError, ValueError):
    category = "dimension"


class NumericError(MomentKitError, ValueError):
    category = "numeric"


class EmptyInputError(MomentKitError, ValueError):
    category = "empty-input"


class EmptyQueryError(EmptyInputError):
    category = "empty-query"


class OrderingError(MomentKitError, ValueError):
    category = "ordering"


class PairingError(MomentKitError, ValueError):
    category = "pairing"


class BudgetError(MomentKitError):
    category = "budget"

    def __init__(self, message, overflow):
        super().__init__(message)
        self.overflow = overflow


class ConfigError(MomentKitError, ValueError):
    category = "config"


class StoreMissingError(MomentKitError):
    category = "store-missing"


class ProviderError(MomentKitError):
    category = "provider"

    def __init__(self, message, segment_id=None):
        if segment_id is not None:
            message = f"segment {segment_id}: {message}"
        super().__init__(message)
        self.segment_id = segment_id


class FormatError(MomentKitError, ValueError):
    category = "format"
