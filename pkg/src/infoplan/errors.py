"""Exception types raised across the package."""


class ModelMismatchError(ValueError):
    """A state carries a motion mode the motion model does not define."""


class SingularityError(ValueError):
    """Received power evaluated at zero source-to-receiver distance."""


class DegenerateLikelihoodError(ValueError):
    """Likelihood requested for a noiseless measurement model."""


class DegenerateUpdateError(RuntimeError):
    """Every posterior particle weight vanished during a filter update."""


class GenerationError(RuntimeError):
    """Trajectory rejection sampling ran out of attempts."""


class GridCoverageError(ValueError):
    """A measurement grid does not cover the predicted density."""


class BoundUndefinedError(ValueError):
    """The sample bound needs a non-zero prediction gap (non-linear case)."""


class ScenarioMismatchError(ValueError):
    """Runs being compared were produced by different scenarios."""
