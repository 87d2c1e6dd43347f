"""Exception and warning types shared across the package."""


class IpwError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(IpwError):
    """Array arguments have inconsistent shapes."""


class DegenerateResponse(IpwError):
    """All response indicators are equal; the response-model MLE does not exist."""


class NonConvergence(IpwError):
    """Newton iteration hit the iteration cap with the score above tolerance.

    Usually signals separation (a covariate perfectly predicting response)
    or severe ill-conditioning of the design.
    """


class SingularInformation(IpwError):
    """The response-model information matrix is not invertible."""


class SingularGram(IpwError):
    """The weighted cross-product of the association design is not invertible."""


class NoSolution(IpwError):
    """Requested moment targets are infeasible for the generating model."""


class BracketFailure(IpwError):
    """Calibration target is not bracketed by the search interval."""


class ZeroReference(IpwError):
    """Relative bias requested against a nonpositive reference variance."""


class MissingColumn(IpwError):
    """A mapped column is absent from the input file header."""


class NonNumeric(IpwError):
    """A cell could not be parsed as a finite number where one is required."""


class MissingInRespondent(IpwError):
    """A respondent row lacks its outcome or an association-model covariate."""


class MissingInResponseCovariate(IpwError):
    """A response-model covariate is missing; these must be fully observed."""


class KnownProbabilityMisuse(UserWarning):
    """Linearized variance requested with externally supplied probabilities.

    The weight-estimation correction assumes the probabilities solve the
    logistic score equation on this sample; with external probabilities the
    corrected estimator is not better grounded than the robust one.
    """
