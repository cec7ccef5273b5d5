"""
Exception hierarchy shared by every metarec module.

MIT License
"""


class MetaRecException(Exception):
    pass


class ConfigError(MetaRecException):
    """Invalid configuration value or command-line argument"""


class DomainError(MetaRecException, ValueError):
    """Argument outside the mathematical domain of an operation"""


class DataError(MetaRecException):
    """Input data cannot be used as given"""


class MalformedInput(DataError):
    """File does not parse under the declared format"""


class EmptyDataset(DataError):
    """Dataset has no instances"""


class NoAttributes(DataError):
    """Dataset has no attributes besides the target"""


class NonNominalTarget(DataError):
    """Target attribute is not nominal"""


class TooFewInstances(DataError):
    """Not enough instances (or classes) for the requested operation"""


class SchemaMismatch(DataError):
    """Instance does not conform to the schema a model was trained on"""


class LengthMismatch(DataError):
    """Aligned sequences differ in length or in row order"""


class ArityMismatch(DataError):
    """Meta-feature vectors disagree on their number of values"""


class OutOfRangeAccuracy(DataError):
    """Accuracy outside [0, 1]"""


class DegenerateTarget(DataError):
    """All candidates appropriate, or none"""


class UndefinedKappa(DataError):
    """Kappa is undefined for this contingency table"""


class BundleError(DataError):
    """Ensemble bundle is missing, incomplete or corrupted"""
