"""Exception types shared across the package."""


class NetworkError(ValueError):
    """Invalid network data (asymmetry, bad measure, unknown vertex, ...)."""


class DisconnectedNetworkError(NetworkError):
    """The conductance graph is disconnected, so some effective resistance is infinite."""


class NotRealizableError(ValueError):
    """A matrix claimed to be a resistance metric does not come from any network."""


class KernelMismatchError(AssertionError):
    """The two independent routes to a kernel disagree beyond tolerance."""


class GenerationBudgetError(RuntimeError):
    """A rejection sampler exhausted its attempt budget; retry with a new seed."""


class RealizabilityWarning(UserWarning):
    """Reconstructed conductances were slightly negative and got clamped to zero."""
