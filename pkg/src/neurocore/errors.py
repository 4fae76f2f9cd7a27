"""Exception types shared across the simulator."""


class InvalidArgument(ValueError):
    """A value is outside the domain an operation accepts."""


class TimeReversal(ValueError):
    """A state was asked to move backwards in time."""


class InfiniteTimeConstant(ZeroDivisionError):
    """A zero bias current would give a filter with an infinite time constant."""


class MalformedEvent(ValueError):
    """An address word has out-of-range fields or reserved bits set."""


class ContractViolation(RuntimeError):
    """An operation was invoked while its precondition does not hold."""


class NumericFault(ArithmeticError):
    """A simulated quantity became non-finite.

    Attributes
    ----------
    entity : str
        Name of the entity whose state went bad, e.g. ``"c0n1"``.
    time : float
        Simulation time at which the fault was detected.
    """

    def __init__(self, entity, time, detail=""):
        self.entity = entity
        self.time = time
        msg = f"non-finite state in {entity} at t={time!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ConfigError(ValueError):
    """An experiment configuration could not be parsed or validated."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}"
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
