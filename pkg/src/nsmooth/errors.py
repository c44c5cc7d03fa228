"""Exception types shared across the toolkit."""


class NSmoothError(Exception):
    """Base class for all toolkit errors."""


class CutLocusAmbiguity(NSmoothError):
    """The requested log/transport has no unique minimal geodesic."""


class DomainViolation(NSmoothError):
    """An operation was called outside its stated domain of validity."""


class UnsupportedDim(NSmoothError):
    """Dimension outside the range covered by the deterministic quadrature rules."""


class UnsupportedTarget(NSmoothError):
    """No built-in isometric embedding for the requested target manifold."""


class InsufficientSamples(NSmoothError):
    """Too many gradient samples were discarded as non-differentiable."""

    def __init__(self, kept, total, message=None):
        self.kept = kept
        self.total = total
        super().__init__(message or f"kept {kept}/{total} samples (need > 50%)")


class TargetBallViolation(NSmoothError):
    """Image of the sampling ball left the convex ball around F(p)."""


class NonConvergence(NSmoothError):
    """Iterative solver hit its iteration cap before certifying optimality."""


class CoverageFailure(NSmoothError):
    """Greedy cover construction failed to cover the test grid."""


class TubeEscape(NSmoothError):
    """Smoothed map left the tubular neighborhood of the embedded target."""

    def __init__(self, point, dist, mu0):
        self.point = point
        self.dist = dist
        self.mu0 = mu0
        super().__init__(f"smoothed value at {point} is {dist:.6g} from the target image (tube radius {mu0:.6g})")


class HypothesisFailure(NSmoothError):
    """A scenario check falsified one of its numbered hypotheses."""

    def __init__(self, step, detail, report=None):
        self.step = step
        self.detail = detail
        self.report = report
        super().__init__(f"step ({step}) failed: {detail}")


class ConfigError(NSmoothError):
    """Run configuration failed schema validation."""

    def __init__(self, field_path, message):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}")
