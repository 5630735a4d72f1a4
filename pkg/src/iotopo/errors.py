"""Exception types shared across the simulator."""


class IotopoError(Exception):
    """Base class for all simulator errors."""


class InvalidRegion(IotopoError):
    pass


class InvalidCount(IotopoError):
    pass


class UnlocalizableGraph(IotopoError):
    pass


class DisconnectedPatch(IotopoError):
    pass


class DegenerateConfiguration(IotopoError):
    pass


class DegenerateOverlap(IotopoError):
    pass


class ZeroEigenvectorComponent(IotopoError):
    pass


class RankDeficient(IotopoError):
    pass


class NonPositivePower(IotopoError):
    pass


class ZeroDistance(IotopoError):
    pass


class Infeasible(IotopoError):
    """A required link cannot be served within the transmit power cap."""

    def __init__(self, i, j, required_dbm, cap_dbm):
        self.i = i
        self.j = j
        self.required_dbm = required_dbm
        self.cap_dbm = cap_dbm
        super().__init__(
            f"edge ({i},{j}) needs {required_dbm:.2f} dBm "
            f"but the cap is {cap_dbm:.2f} dBm"
        )


class NotConverged(IotopoError):
    """Topology extraction hit the iteration cap before the step test."""

    def __init__(self, trace):
        self.trace = trace
        super().__init__(f"no convergence after {len(trace)} iterations")


class EmptyNetwork(IotopoError):
    pass


class LengthMismatch(IotopoError):
    pass


class EmptyInput(IotopoError):
    pass


class ConfigError(IotopoError):
    """Bad experiment configuration; message names the offending field."""
