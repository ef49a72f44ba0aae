"""Exception types raised by censim."""


class CensimError(ValueError):
    """Base class for estimation and input errors."""


class EmptySampleError(CensimError):
    def __init__(self, msg="empty sample"):
        super().__init__(msg)


class WeightSingularityError(CensimError):
    def __init__(self, msg="weight singularity"):
        super().__init__(msg)


class DegenerateIndexError(CensimError):
    def __init__(self, msg="degenerate index"):
        super().__init__(msg)


class EmptyNeighborhoodError(CensimError):
    def __init__(self, msg="empty neighborhood"):
        super().__init__(msg)


class EmptyCriterionError(CensimError):
    def __init__(self, msg="empty criterion"):
        super().__init__(msg)


class SingularInformationError(CensimError):
    def __init__(self, msg="singular information"):
        super().__init__(msg)


class TailTruncationWarning(UserWarning):
    """The tail integral hit a point where 1 - H or 1 - G vanishes."""
