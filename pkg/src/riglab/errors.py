"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when arguments violate an operation's preconditions."""


class DomainError(InvalidInputError):
    """Raised when a closed-form expression is evaluated outside its domain."""


class NumericError(ArithmeticError):
    """Raised when a factorisation, solve or eigensolve fails."""
