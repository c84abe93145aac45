"""Exception types shared across modules."""


class VPCalError(Exception):
    """Base class; ``code`` is the machine-readable error name."""

    @property
    def code(self):
        return type(self).__name__


class OutsideTube(VPCalError):
    pass


class NotOnBoundary(VPCalError):
    pass


class EmptyInterface(VPCalError):
    pass


class IncompatibleData(VPCalError):
    pass


class SolverDiverged(VPCalError):
    pass


class TubeTooWide(VPCalError):
    pass


class SampleOutsideDomain(VPCalError):
    pass


class DegenerateXi(VPCalError):
    pass


class ResolutionError(VPCalError):
    pass


class SingularFit(VPCalError):
    pass


class ZeroInitialEntropy(VPCalError):
    pass


class ConfigError(VPCalError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key
