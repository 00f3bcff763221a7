"""Exception types shared across the toolkit."""


class ValveSegError(Exception):
    """Base class for all toolkit errors."""


class NrrdFormatError(ValveSegError):
    """Malformed or unsupported NRRD content.

    ``field`` names the offending header field so callers can surface it.
    """

    def __init__(self, message, field=None):
        self.field = field
        if field is not None:
            message = f"{message} (header field: {field})"
        super().__init__(message)


class GeometryError(ValveSegError):
    """Incompatible or invalid grid geometry."""


class AnnulusFitError(ValveSegError):
    """Annulus definition cannot be fitted (too few points, degenerate plane, ...)."""


class ContourCollapsedError(ValveSegError):
    """The evolving contour vanished (or filled the whole grid).

    Recoverable: interactive callers are expected to undo the step.
    """

    def __init__(self, message, iterations_completed=0):
        self.iterations_completed = iterations_completed
        super().__init__(message)


class EmptySurfaceError(ValveSegError):
    """Isosurface extraction found no crossings."""


class EmptyProximalSurfaceError(ValveSegError):
    """Proximal-surface extraction rejected every vertex."""


class StageError(ValveSegError):
    """Session command issued in the wrong stage, or with nothing to act on."""
