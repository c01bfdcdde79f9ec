"""Exception hierarchy shared across the package."""


class ArchSearchError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(ArchSearchError):
    """An input object (space, genotype, batch, shape, config) violates its contract."""


class LayoutError(ArchSearchError):
    """An encoded vector does not match the layout derived from the space."""


class NumericalError(ArchSearchError):
    """A numerical routine failed (e.g. kernel matrix singular after jitter)."""


class TableMissError(ArchSearchError):
    """Tabular surrogate lookup for a genotype not present in the table."""


class StrategyConverged(ArchSearchError):
    """A strategy has exhausted its search frontier and cannot propose further."""


class EvaluatorFailureThreshold(ArchSearchError):
    """Too many failed trials; the run aborts."""
