"""Exception types shared across the package."""


class InvalidPriorError(ValueError):
    """Probability vector with non-positive entries or wrong normalization."""


class EdgeProbabilityError(ValueError):
    """Edge-probability formula left [0, 1] for some community pair."""

    def __init__(self, message, pair=None, probability=None):
        super().__init__(message)
        self.pair = pair
        self.probability = probability


class SizeLimitError(ValueError):
    """Instance exceeds a hard size guard (dense storage or enumeration)."""


class NonConvergenceError(RuntimeError):
    """Iterative minimization failed from every start with no fallback."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory or []


class BpDivergenceError(RuntimeError):
    """Message passing produced non-finite values."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
