"""Exception hierarchy shared by the model, optimizer, simulator and CLI."""


class FactoryModelError(Exception):
    """Base class for all msfactory errors."""


class NoConvergence(FactoryModelError, ValueError):
    """Physical error rate is at or above the surface-code threshold."""


class DistanceOverflow(FactoryModelError, ValueError):
    """Required code distance exceeds the configured cap."""


class StarvedFactory(FactoryModelError):
    """Factory yield collapsed to zero so demand can never be served."""


class Infeasible(FactoryModelError):
    """Design point cannot reach the error target or violates a constraint."""


class NoFeasibleLevel(Infeasible):
    """No block-code level up to ``l_max`` reaches the error target."""


class EmptySchedule(FactoryModelError, ValueError):
    pass


class SchemaViolation(FactoryModelError, ValueError):
    """Workload file does not match the expected schema."""


class VersionMismatch(SchemaViolation):
    pass


class DoesNotFit(FactoryModelError, ValueError):
    """Factories plus data qubits do not fit on the requested lattice."""


class UnroutableRequest(FactoryModelError):
    """A data tile is permanently enclosed and can never reach a port."""
