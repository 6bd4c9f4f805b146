"""Exception hierarchy shared across the package."""


class DualCausalError(Exception):
    """Base class for all package errors."""


class ShapeError(DualCausalError, ValueError):
    pass


class InvalidArgumentError(DualCausalError, ValueError):
    pass


class NumericDomainError(DualCausalError, ArithmeticError):
    pass


class SpecValidationError(DualCausalError, ValueError):
    pass


class GenerationError(DualCausalError, RuntimeError):
    pass


class ParseError(DualCausalError, ValueError):
    pass


class UndefinedConditionalError(DualCausalError, ZeroDivisionError):
    """Conditioning event has zero probability."""


class CriterionNotSatisfiedError(DualCausalError, ValueError):
    """An adjustment criterion does not hold in the configured graph."""


class TrainingDivergedError(DualCausalError, FloatingPointError):
    def __init__(self, step, loss):
        super().__init__(f"training diverged at step {step}: loss={loss!r}")
        self.step = step
        self.loss = loss


class ConfigError(DualCausalError, ValueError):
    pass
