"""Shared exception types."""


class ContractError(ValueError):
    """A documented precondition was violated by the caller."""


class ShapeError(ContractError):
    """Operand shapes are incompatible for the requested operation."""


class VocabLookupError(ContractError):
    """A token id or parameter name is outside the valid range."""


class TapeConsumedError(ContractError):
    """backward() was called twice on the same tape."""
