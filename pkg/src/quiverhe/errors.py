"""Exception hierarchy shared across the package."""


class QuiverHEError(Exception):
    """Base class for all errors raised by this package."""


# -- model construction / validation ----------------------------------------

class DuplicateIdError(QuiverHEError):
    pass


class DanglingEndpointError(QuiverHEError):
    pass


class IllegalSectionError(QuiverHEError):
    """Nonzero arrow section where the relevant Hom space vanishes."""


class DegreeMismatchError(QuiverHEError):
    """Polynomial section degree exceeds the line-bundle degree."""


class FixtureViolationError(QuiverHEError):
    """Vertex degree data breaks the bidegree pattern of its base fixture."""


class ModelValidationError(QuiverHEError):
    """Aggregates every violation found while validating a model."""

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(str(e) for e in self.errors)
        super().__init__(f"{len(self.errors)} validation error(s): {lines}")


# -- stability ---------------------------------------------------------------

class ZeroRankError(QuiverHEError):
    pass


class UnsupportedRankError(QuiverHEError):
    """Rank >= 2 vertex with no declared subobject lattice."""


class NoSubobjectsError(QuiverHEError):
    pass


class BadSubobjectError(QuiverHEError):
    """Declared subobject breaks an invariant against its model."""


class BadParamsError(QuiverHEError):
    """Stability parameters outside their legal ranges."""


# -- chambers ----------------------------------------------------------------

class DimensionUnsupportedError(QuiverHEError):
    """Exact arrangements are only computed in the 2-vertex tau-plane."""


# -- geometry ----------------------------------------------------------------

class TooCoarseError(QuiverHEError):
    pass


class TransformFailureError(QuiverHEError):
    pass


# -- endomorphism calculus ---------------------------------------------------

class SingularMetricError(QuiverHEError):
    pass


class SingularTwistError(QuiverHEError):
    pass


class NotPositiveError(QuiverHEError):
    pass


# -- solver -------------------------------------------------------------------

class FixtureUnsupportedError(QuiverHEError):
    """The PDE solver only runs on the P1 fixture."""


class RankUnsupportedError(QuiverHEError):
    """The PDE solver only runs on rank-1-per-vertex models."""


class CalibrationAmbiguousError(QuiverHEError):
    """Both Laplacian sign candidates pass (or fail) the probes; abort."""


class LinearSolveFailureError(QuiverHEError):
    pass


class LineSearchFailureError(QuiverHEError):
    pass


class PreconditionError(QuiverHEError):
    """Operation invoked outside its stated precondition."""


class NoCollapseDetectedError(QuiverHEError):
    """Blow-up without separable vertex scales; no destabilizer extracted."""


class VerificationFailureError(QuiverHEError):
    pass


# -- cli / io ------------------------------------------------------------------

class ProblemFileError(QuiverHEError):
    pass


class IoFailureError(QuiverHEError):
    pass
