"""Exception hierarchy shared by all stiffopt modules.

The CLI maps these onto process exit codes: validation problems exit 3,
quality-gate failures exit 2 and numerical failures exit 4.
"""


class StiffoptError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(StiffoptError):
    """Bad input: config values, file contents or violated preconditions."""


class MeshError(ValidationError):
    """Invalid surface mesh (empty, degenerate connectivity, bad indices)."""


class NonManifoldError(MeshError):
    """Mesh connectivity is not manifold.

    Carries the offending edge (pair of vertex ids) or vertex id.
    """

    def __init__(self, message, edge=None, vertex=None):
        super().__init__(message)
        self.edge = edge
        self.vertex = vertex


class GateFailure(StiffoptError):
    """Parameterization quality gate rejected the chart(s)."""

    def __init__(self, message, decisions=None):
        super().__init__(message)
        self.decisions = decisions or []


class NumericalError(StiffoptError):
    """Linear solver or iteration failed (singular system, bad residual)."""


class StaleStateError(StiffoptError):
    """A result object no longer matches the design it was computed for."""


class MeshCleaningWarning(UserWarning):
    """Emitted when loaders drop degenerate or duplicate triangles."""
