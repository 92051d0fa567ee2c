class CritForestError(Exception):
    """Base class of every error raised by this package"""


class DomainError(CritForestError, ValueError):
    pass


class ConfigError(CritForestError, ValueError):
    pass


class ValidationError(CritForestError, ValueError):
    pass


class CapacityError(CritForestError):
    def __init__(self, needed: int, capacity: int, what: str = 'table'):
        super().__init__(f'{what} covers {capacity} vertices, {needed} needed')
        self.needed = needed
        self.capacity = capacity


class AccuracyError(CritForestError):
    """Quadrature did not reach its tolerance inside the subdivision budget.

    Carries the best estimate reached and the error bound achieved for it, so callers can decide
    whether the estimate is still usable.
    """

    def __init__(self, message: str, estimate: float, bound: float):
        super().__init__(f'{message} (estimate={estimate!r}, bound={bound:.3g})')
        self.estimate = estimate
        self.bound = bound


class BudgetError(CritForestError):
    def __init__(self, message: str, attempts: int):
        super().__init__(f'{message} after {attempts} attempts')
        self.attempts = attempts


class BoundUndefinedError(CritForestError, ValueError):
    pass


class ChecksumError(CritForestError):
    pass
