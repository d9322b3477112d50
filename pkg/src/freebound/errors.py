"""Exception hierarchy shared by every freebound module."""


class FreeboundError(Exception):
    """Base class for all freebound errors."""


class DegenerateChartError(FreeboundError):
    """The chart fails to be an immersion at a sampled point."""


class StencilOutOfDomainError(FreeboundError):
    """A finite-difference stencil would leave the parameter domain."""


class ZeroGraphQuantityError(FreeboundError):
    """s_V vanishes (or is too small) where a Killing-graphical hypothesis is needed."""

    def __init__(self, message, points=None):
        super().__init__(message)
        self.points = points


class PreconditionViolation(FreeboundError):
    """A check was invoked on a surface that does not satisfy its hypotheses."""


class QuadratureNonConvergence(FreeboundError):
    """Doubling the quadrature order did not settle the integral."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


class ShootingNoBracketError(FreeboundError):
    """No sign change of the orthogonality functional over the scanned range."""

    def __init__(self, message, scan=None):
        super().__init__(message)
        self.scan = scan or []


class FrameConstructionError(FreeboundError):
    """The adapted boundary frame could not be built."""


class GraphicalityViolation(FreeboundError):
    """A mesh that must be graphical has a vertex with s_V <= 0."""

    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


class MeshQualityError(FreeboundError):
    """Degenerate triangles or broken manifold structure."""


class NonConvergenceError(FreeboundError):
    """The descent solver hit its iteration cap."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InsufficientNeighborhoodError(FreeboundError):
    """Too few neighbours to fit a local quadric."""
