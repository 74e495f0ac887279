"""Exception hierarchy shared by all lpreceiver modules."""


class LPReceiverError(Exception):
    """Base class for every error raised by this package."""


class MalformedGraphError(LPReceiverError):
    """A factor graph (or its description file) violates a structural invariant."""


class MalformedConfigurationError(LPReceiverError):
    """A configuration is not total over the variables or uses a foreign symbol."""


class InstanceTooLargeError(LPReceiverError):
    """Exhaustive enumeration was requested above the configured cap."""


class NoValidConfigurationError(LPReceiverError):
    """The global behavior is empty."""


class ConfigurationError(LPReceiverError):
    """Inconsistent builder input, e.g. an anchor table missing a hidden variable."""


class NotInPolytopeError(LPReceiverError):
    """A point violates polytope constraints.

    ``violations`` lists human-readable descriptions of the violated constraints.
    """

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class IterationLimitError(LPReceiverError):
    """The simplex method exceeded ``max_iters`` pivots."""


class InternalError(LPReceiverError):
    """An invariant guaranteed by theory was observed to fail (a bug)."""


class IdenticalPseudoconfigurationError(LPReceiverError):
    """Pseudodistance is undefined: the expected signal equals the transmitted one."""


class NotRealizableError(LPReceiverError):
    """A point could not be snapped to rationals below the denominator cap."""


class MalformedCoverError(LPReceiverError):
    """A cover configuration has inconsistent shapes."""


class UnsupportedModeError(LPReceiverError):
    """The operation does not support the requested code/channel/mode."""
