"""Exception hierarchy shared by all modules."""


class RiwalkError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(RiwalkError, ValueError):
    pass


class DegenerateScale(RiwalkError, ValueError):
    """Scale parameters too small for the trap geometry to make sense."""


class DegenerateCapacity(RiwalkError):
    pass


class RegionTooLarge(RiwalkError):
    pass


class SupportMismatch(RiwalkError, ValueError):
    pass


class ConfigurationTooRare(RiwalkError):
    pass


class WindowExhausted(RiwalkError):
    pass


class WindowTooSmall(RiwalkError):
    pass


class InvalidBias(RiwalkError, ValueError):
    pass


class IsolatedSite(RiwalkError):
    pass


class Disconnected(RiwalkError):
    pass


class NonConvergence(RiwalkError):
    pass


class BrokenPath(RiwalkError, ValueError):
    pass


class NoCrossingPath(RiwalkError):
    pass


class TrapNotFound(RiwalkError):
    pass


class ExcessCensoring(RiwalkError):
    pass


class ConfigInvalid(RiwalkError, ValueError):
    """Raised with a mapping of field name to diagnostic message."""

    def __init__(self, problems):
        self.problems = dict(problems)
        msg = "; ".join(f"{k}: {v}" for k, v in sorted(self.problems.items()))
        super().__init__(msg)
