"""Exception types shared across the library."""


class TrialDesignError(Exception):
    """Base class for every error raised by this package."""


class FirstColumnNotOnes(TrialDesignError):
    """Covariate matrix is missing the all-ones intercept column."""


class RankDeficient(TrialDesignError):
    """Covariate matrix does not have full column rank."""


class TooFewRows(TrialDesignError):
    """Fewer rows than covariate columns."""


class UnknownLevel(TrialDesignError):
    """A CSV cell holds a value outside the declared levels of its column."""


class EmptyAfterExclusion(TrialDesignError):
    """Every row was dropped for missing cells."""


class IllConditioned(TrialDesignError):
    """Gram matrix condition number is too large to factor reliably."""


class ConfoundedDesign(TrialDesignError):
    """Allocation confounds treatment with covariates; the estimator
    covariance in the original objective does not exist."""


class AllConfounded(TrialDesignError):
    """Every sampled allocation was confounded; no benchmark value exists."""


class DuplicateCut(TrialDesignError):
    """Separation returned a covariate vector that is already a cut.

    With a value-faithful master this cannot happen before the stopping
    test fires, so seeing it means the master solution and its reported
    value disagree.
    """
