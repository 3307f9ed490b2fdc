"""Exception types shared across the package."""


class ActinfError(Exception):
    """Base class for all package-specific errors."""


class DimMismatchError(ActinfError, ValueError):
    """Operands have incompatible dimensions."""


class AllNegInfError(ActinfError, ValueError):
    """Softmax input has no finite entry."""


class NonPositiveArgError(ActinfError, ValueError):
    """Special function called outside its (0, inf) domain."""


class InvalidJointError(ActinfError, ValueError):
    """Joint probability table does not sum to one (or has negative mass)."""


class TooLargeError(ActinfError, ValueError):
    """Instance exceeds the brute-force enumeration guard."""


class ModelContradictionError(ActinfError, RuntimeError):
    """An observation is impossible under the model (zero-support column)."""


class NotFullyObservedError(ActinfError, ValueError):
    """Operation requires a belief trajectory with t == T."""


class EmptyTrainingSetError(ActinfError, ValueError):
    """Learning was invoked with no observation sequences."""


class EmptyPolicySetError(ActinfError, ValueError):
    """Planner was invoked with no candidate policies."""


class HorizonExhaustedError(ActinfError, RuntimeError):
    """advance() called on a trajectory whose present time already equals T."""


class BadParamsError(ActinfError, ValueError):
    """Environment builder called with out-of-range parameters."""


class NoFutureError(ActinfError, ValueError):
    """Predictive diagnostics require at least one future time step (t < T)."""
