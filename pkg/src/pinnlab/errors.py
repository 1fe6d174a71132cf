"""Exception hierarchy shared across pinnlab modules."""


class PinnlabError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PinnlabError):
    pass


class NumericalError(PinnlabError):
    """Raised for failures of a numerical procedure (overflow, divergence, ...)."""


class CertificationError(PinnlabError):
    pass


# autodiff
class KinkAtPoint(NumericalError):
    """A ReLU pre-activation is exactly zero, so input derivatives do not exist."""


class NonFiniteGradient(NumericalError):
    pass


class NonFiniteLoss(NumericalError):
    def __init__(self, iteration, value):
        super().__init__(f"non-finite loss {value!r} at iteration {iteration}")
        self.iteration = iteration
        self.value = value


# network
class InvalidArchitecture(ConfigError):
    pass


class IncompatibleNetworks(ConfigError):
    pass


class WrongActivation(ConfigError):
    pass


# collocation
class NonIntegralMesh(ConfigError):
    pass


class MeshTooCoarse(ConfigError):
    pass


class GridTooSmall(ConfigError):
    pass


# losses
class StencilOutOfRange(ConfigError):
    pass


class DimensionMismatch(ConfigError):
    pass


class UnsupportedExponent(ConfigError):
    pass


class NonFinite(NumericalError):
    pass


# models
class NoConvergence(NumericalError):
    def __init__(self, iterations, residual):
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


class FixedPointDiverged(NumericalError):
    def __init__(self, step, detail=""):
        super().__init__(f"fixed-point iteration diverged at step {step}" + (f": {detail}" if detail else ""))
        self.step = step


# witness
class DuplicateAbscissa(ConfigError):
    pass


class ExhaustedRetries(NumericalError):
    pass


class IllConditioned(NumericalError):
    pass


class BallIntersectsCollocation(ConfigError):
    pass


class InvalidRegime(ConfigError):
    pass


# cli
class ZeroReference(NumericalError):
    pass
