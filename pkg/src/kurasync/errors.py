"""Exception hierarchy for kurasync."""


class KurasyncError(Exception):
    """Base class for all package errors."""


class NetworkError(KurasyncError, ValueError):
    """Malformed network description."""


class DisconnectedGraphError(NetworkError):
    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        listing = "; ".join("{" + ", ".join(str(i) for i in c) + "}" for c in self.components)
        super().__init__(f"graph is disconnected, components (0-based nodes): {listing}")


class SpectrumError(KurasyncError):
    pass


class PowerFlowError(KurasyncError):
    pass


class NearCriticalLoadingError(PowerFlowError):
    pass


class NoConvergenceError(PowerFlowError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (final residual {residual:.3e})")


class DomainError(KurasyncError, ValueError):
    pass


class AssumptionViolation(KurasyncError):
    """A certificate precondition does not hold for the given equilibrium."""

    def __init__(self, assumption, detail):
        self.assumption = assumption
        super().__init__(f"{assumption}: {detail}")


class WindowError(KurasyncError):
    pass


class SimulationDiverged(KurasyncError):
    def __init__(self, last_time, partial=None):
        self.last_time = last_time
        self.partial = partial
        super().__init__(f"non-finite state after t = {last_time:.6f} s")


class ConfigError(KurasyncError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid configuration:\n" + "\n".join(str(d) for d in self.diagnostics))
