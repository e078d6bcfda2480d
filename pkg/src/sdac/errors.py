"""Exception hierarchy shared by every sdac module."""


class SdacError(Exception):
    """Base class for structured errors raised by the workbench."""


class ParameterError(SdacError, ValueError):
    """Inconsistent or invalid physical parameters."""


class SingularityError(SdacError, ValueError):
    """Euler-angle transform evaluated too close to pitch = +/- 90 deg."""


class TrimError(SdacError):
    """Trim root-solve failed, or a linearization was requested off-trim."""


class IdentificationError(SdacError):
    """Snapshot window unusable for regression."""


class RiccatiError(SdacError):
    """Riccati iteration did not converge or the pair is not stabilizable."""


class IntegrationError(SdacError):
    """Non-finite state derivative encountered by the integrator."""


class ConfigError(SdacError, ValueError):
    """Malformed configuration or parameter file."""
