"""Exception types shared across the package."""


class BvlabError(Exception):
    pass


class SizeLimitError(BvlabError):
    """An input exceeds a guard meant to keep work and memory bounded."""


class TableRangeError(BvlabError):
    """A request reaches beyond the precomputed table."""


class ContractError(BvlabError):
    """A precondition of an operation was violated by the caller."""


class ArithmeticOverflowError(BvlabError):
    """Exact integer arithmetic failed its overflow guard."""


class NumericError(BvlabError):
    """A numerical procedure did not converge to the requested accuracy."""


class InconsistencyError(BvlabError):
    """Two routes to the same quantity disagree beyond tolerance."""


class InequalityViolation(BvlabError):
    """A proved inequality failed numerically; carries a counterexample record."""

    def __init__(self, record: dict):
        super().__init__(f"{record.get('inequality_id')} violated: lhs={record.get('lhs')} rhs={record.get('rhs')}")
        self.record = record
