"""Exception hierarchy for starfactor"""


class StarFactorError(Exception):
    """Base class for every error raised by the package"""


class PairingError(StarFactorError, ValueError):
    """Invalid pairing space, pairing or serialized pairing/graph"""


class GraphError(StarFactorError, ValueError):
    """A multigraph does not satisfy the precondition of an operation"""


class ConfigurationError(StarFactorError, ValueError):
    """Experiment or CLI parameters outside the supported domain"""


class SizeExplosionError(StarFactorError):
    """An exhaustive enumeration or oracle was asked for more than its cap"""

    def __init__(self, message, size=None, cap=None):
        super().__init__(message)
        self.size = size
        self.cap = cap


class RegionError(StarFactorError, ValueError):
    """A point lies outside the region where F and alpha are defined"""


class VerificationError(StarFactorError):
    """A required numeric identity failed"""

    def __init__(self, message, checks=None):
        super().__init__(message)
        self.checks = list(checks or [])
