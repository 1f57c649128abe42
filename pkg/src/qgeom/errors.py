"""Exception hierarchy shared by all qgeom modules."""


class QGeomError(Exception):
    """Base class for every error raised by qgeom."""


class ParseError(QGeomError, ValueError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class UnsupportedFormat(QGeomError, ValueError):
    pass


class DegenerateGeometry(QGeomError, ValueError):
    pass


class DegenerateFace(DegenerateGeometry):
    def __init__(self, message, face=None):
        self.face = face
        super().__init__(message)


class IsolatedVertex(QGeomError, ValueError):
    def __init__(self, message, vertices=()):
        self.vertices = tuple(vertices)
        super().__init__(message)


class EmptyInput(QGeomError, ValueError):
    pass


class SizeMismatch(QGeomError, ValueError):
    pass


class EmptyNeighborhood(QGeomError, ValueError):
    pass


class NoCandidateTriangles(QGeomError, ValueError):
    pass


class TargetTooSmall(QGeomError, ValueError):
    pass


class NonFiniteLoss(QGeomError, FloatingPointError):
    """Raised when the optimizer encounters a NaN/Inf loss or gradient.

    ``trace`` carries the records accumulated before the failure.
    """

    def __init__(self, step, component, trace=None):
        self.step = step
        self.component = component
        self.trace = trace
        super().__init__(f"non-finite {component} loss at step {step}")
