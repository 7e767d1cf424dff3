class ValidationError(ValueError):
    """Raised when an input violates a model or estimator precondition."""


class SingularSystemError(ArithmeticError):
    """A dense solve hit a singular (or numerically singular) system."""


class RankDeficientError(ValidationError):
    def __init__(self, message, rank=None):
        super().__init__(message)
        self.rank = rank
