"""Exception hierarchy shared by all cellgraph modules."""


class CellgraphError(Exception):
    """Base class for data errors raised by cellgraph."""


class SchemaError(CellgraphError, ValueError):
    """Input header or document does not match the declared schema."""


class RecordError(CellgraphError, ValueError):
    """A record violates its invariants (raised in strict parsing mode)."""


class UndefinedStatisticError(CellgraphError, ArithmeticError):
    """A statistic is undefined for the given input, e.g. zero variance."""
