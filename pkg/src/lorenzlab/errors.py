"""Exception types shared by all lorenzlab modules."""


class LorenzLabError(Exception):
    """Base class for all lorenzlab errors."""


class SingularLeaf(LorenzLabError):
    """A section point sits on the stable-manifold trace x = 0 and never returns."""


class SingularPoint(LorenzLabError):
    """The one-dimensional map was evaluated at its singular point."""


class SingularOrbit(LorenzLabError):
    """An orbit hit the singular point exactly during iteration."""


class DomainEscape(LorenzLabError):
    """The Poincare image left the cross-section; parameters are misconfigured."""


class IterationBudgetExceeded(LorenzLabError):
    """An iteration exceeded its configured cap (diagnostic)."""


class CoverageShortfall(LorenzLabError):
    """Partition refinement hit the depth cap before reaching the mass target."""

    def __init__(self, achieved_mass, mass_target, depth_cap):
        self.achieved_mass = achieved_mass
        self.mass_target = mass_target
        self.depth_cap = depth_cap
        super().__init__(
            f"partition covers only {achieved_mass:.6f} of the inducing interval "
            f"(target {mass_target}) at depth cap {depth_cap}"
        )


class FitUnreliable(LorenzLabError):
    """Too few support points for a meaningful tail fit."""


class UnresolvedMassTooLarge(LorenzLabError):
    """The partition leaves too much unresolved mass for transfer-operator work."""


class NoConvergence(LorenzLabError):
    """Fixed-point iteration hit its cap with residual above tolerance."""

    def __init__(self, residual, tol, iterations):
        self.residual = residual
        self.tol = tol
        self.iterations = iterations
        super().__init__(
            f"no convergence after {iterations} iterations: residual {residual:.3e} > tol {tol:.3e}"
        )


class UnresolvedPoint(LorenzLabError):
    """A point fell outside every certified partition cell."""


class SequenceDegenerate(LorenzLabError):
    """A probe sequence entered unresolved territory."""


class TruncationTooLarge(LorenzLabError):
    """Unresolved-branch mass corrupts a branch sum beyond tolerance."""


class SignalBelowNoise(LorenzLabError):
    """No time range of the correlation series clears the noise floor."""


class ParseError(LorenzLabError):
    """Config file could not be parsed; carries the offending line number."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ValidationError(LorenzLabError):
    """One or more config invariants are violated; lists every violation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.violations))
