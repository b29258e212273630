"""Exception hierarchy for cocyclelab.

Every failure mode that callers are expected to handle gets its own class;
all of them derive from :class:`CocycleLabError` so CLI entry points can
distinguish computation errors from programming errors.
"""


class CocycleLabError(Exception):
    """Base class for all package errors."""


# -- linear algebra -----------------------------------------------------------

class SingularMatrix(CocycleLabError):
    """Matrix failed the invertibility invariant."""


class BadExponent(CocycleLabError):
    """Exterior power index outside 1..d."""


class CollinearInputs(CocycleLabError):
    """Two direction vectors were (numerically) collinear."""


class DegenerateSplitting(CocycleLabError):
    """A splitting's minimal angle is below the usable threshold."""


# -- base dynamics ------------------------------------------------------------

class HorizonExceeded(CocycleLabError):
    """No return to the target set within the configured horizon."""


class NotIrrational(CocycleLabError):
    """Rotation angle is too close to a rational p/q with small q."""


# -- cocycles -----------------------------------------------------------------

class BaseMismatch(CocycleLabError):
    """Two cocycles do not share a base system."""


class MissingTableEntry(CocycleLabError):
    """A locally constant table does not cover the requested word."""


class ProductOverflow(CocycleLabError):
    """A plain matrix product exceeded the overflow guard (use log-scaled)."""


class FloorCollision(CocycleLabError):
    """A patch domain overlaps an existing patch domain."""


# -- spectrum estimation ------------------------------------------------------

class LostOrthogonality(CocycleLabError):
    """QR re-orthonormalization residual exceeded its tolerance."""


class NoGap(CocycleLabError):
    """Estimated gap at the requested index is not resolved from noise."""


# -- interchange construction -------------------------------------------------

class BadEps(CocycleLabError):
    """Perturbation size must lie in (0, 1)."""


class HypothesisViolated(CocycleLabError):
    """The two-to-one expansion hypothesis fails for the given vectors."""


class PeriodicWindow(CocycleLabError):
    """The anchor orbit window is periodic."""


class AngleOverflow(CocycleLabError):
    """The closing rotation cannot stay inside the angle budget; the
    requested length is too short for this instance."""


class CertificateViolation(CocycleLabError):
    """A sequence failed re-verification; carries the offending index."""

    def __init__(self, message, index=None, residual=None):
        super().__init__(message)
        self.index = index
        self.residual = residual


# -- perturbation engine ------------------------------------------------------

class WindowNotFound(CocycleLabError):
    """No admissible (n, l) window found below the configured cap."""


class ClaimOneViolation(CocycleLabError):
    """The wedge image of the top direction kept a component along it."""


class InsufficientGoodMass(CocycleLabError):
    """The empirical good-set mass criterion cannot be met below the cap."""


class DominationDetected(CocycleLabError):
    """The cocycle is empirically dominated; perturbation refuses to run."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


# -- experiment harness -------------------------------------------------------

class ConfigError(CocycleLabError):
    """Experiment configuration failed validation."""


class ReplayMismatch(CocycleLabError):
    """Replayed headline numbers diverge from the stored report."""

    def __init__(self, message, fields=None):
        super().__init__(message)
        self.fields = fields or []
