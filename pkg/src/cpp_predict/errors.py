"""Exception and warning types raised by the numerical core."""


class CppError(ValueError):
    """Base class for errors raised by this package."""


class DegenerateLeverage(CppError):
    """Observation ``i`` has leverage numerically equal to one."""

    def __init__(self, i, leverage):
        self.i = i
        self.leverage = leverage
        super().__init__(f"leverage of observation {i} is {leverage!r} (>= 1 - 1e-12)")


class DegenerateAugmentation(CppError):
    """The rank-one addition of the candidate covariate is ill-conditioned."""

    def __init__(self, i, denom):
        self.i = i
        self.denom = denom
        super().__init__(f"augmentation denominator for observation {i} is {denom!r}")


class DegenerateLoo(CppError):
    """Diagonal of the inverse GP covariance vanishes at observation ``i``."""

    def __init__(self, i, value):
        self.i = i
        self.value = value
        super().__init__(f"[Sigma^-1]_ii for observation {i} is {value!r}")


class NotPositiveDefinite(CppError):
    """A matrix required to be symmetric positive definite is not."""


class AllDZero(CppError):
    """Every swap slope is zero, so the objective does not depend on the candidate."""


class IllPosedBasis(UserWarning):
    """More basis functions than observations; only the prior regularizes the fit."""
