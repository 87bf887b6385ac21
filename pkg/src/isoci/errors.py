"""Exception and warning types shared across the package."""


class NoFeasibleBlockError(ValueError):
    """No candidate block straddles the query point on every axis."""


class ScatterUnsupportedError(ValueError):
    """Operation requires a lattice design."""


class OutOfSupportError(ValueError):
    """Query point lies outside the support of the data."""


class EmptySeriesError(ValueError):
    """Weighted series has no entries."""


class SimulationFailureError(RuntimeError):
    """Too many Monte Carlo replications failed to produce a statistic."""


class ConfigError(ValueError):
    """Invalid experiment configuration (bad field, missing key, bad value)."""


class ExpressionError(ValueError):
    """Truth expression failed to parse or references unknown names."""


class BoundaryVarianceWarning(UserWarning):
    """Family-based variance hit a boundary fit; interval is degenerate."""


class DegenerateBoundaryWarning(UserWarning):
    """Point estimate sits on the boundary of its range; interval collapses."""
