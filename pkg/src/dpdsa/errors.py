"""Exception types raised across the package."""


class DPDSAError(Exception):
    """Base class for all package errors."""


class ConfigError(DPDSAError, ValueError):
    """Invalid configuration. ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)


class InvalidGraph(DPDSAError, ValueError):
    pass


class MeanGraphDisconnected(InvalidGraph):
    pass


class Disconnected(InvalidGraph):
    pass


class InvalidSet(DPDSAError, ValueError):
    pass


class NoNoiseModel(DPDSAError):
    pass


class NoKnownOptimum(DPDSAError):
    pass


class HessianSumNotPD(DPDSAError, ValueError):
    pass


class NotHurwitz(DPDSAError, ValueError):
    pass


class DegenerateVariance(DPDSAError, ValueError):
    pass
