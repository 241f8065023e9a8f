"""Exception types shared across the laboratory modules."""


class NumericFailure(RuntimeError):
    """A numerical procedure failed to reach its declared tolerance."""

    def __init__(self, message, achieved=None, trace=None):
        super().__init__(message)
        self.achieved = achieved
        self.trace = trace or []


class GeometryDegenerateError(NumericFailure):
    """Leaf metric degenerated (focal point) before the requested offset."""

    def __init__(self, message, focal_distance=None):
        super().__init__(message)
        self.focal_distance = focal_distance


class OutOfChartError(ValueError):
    """A graph or map left the Fermi coordinate chart."""


class NodalTopologyError(RuntimeError):
    """Nodal set is not a union of graphs over the base."""


class DegenerateGradientError(RuntimeError):
    """|grad u| vanished on a set where the level-set geometry is queried."""


class NoEquilibriumError(RuntimeError):
    """The reduced sheet system has no equilibrium (repulsion unbalanced)."""


class FoliationOrderError(RuntimeError):
    """Graphs of a would-be foliation cross."""


class StepSizeError(RuntimeError):
    """Energy increased beyond slack during descent."""


class NoContractionError(NumericFailure):
    """Fixed-point iteration failed to contract."""


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""
