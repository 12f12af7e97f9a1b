"""Exception hierarchy shared by all egoscene modules."""


class EgoSceneError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(EgoSceneError, ValueError):
    pass


class OutOfFov(EgoSceneError, ValueError):
    """A point or pixel lies outside the camera's field of view."""


class DegenerateRay(EgoSceneError, ValueError):
    """Projection of the camera center itself."""


class NonPositiveDepth(EgoSceneError, ValueError):
    pass


class ParseError(EgoSceneError, ValueError):
    pass


class InvalidCalibration(EgoSceneError, ValueError):
    pass


class InvalidParams(EgoSceneError, ValueError):
    pass


class EmptyBoundary(EgoSceneError, ValueError):
    """Inpainting was asked to fill a map that has no valid pixel."""


class NoOverlap(EgoSceneError, ValueError):
    """Two depth maps share no jointly-valid pixel."""


class NonPositiveGT(EgoSceneError, ValueError):
    pass


class DegenerateHeatmap(EgoSceneError, ValueError):
    pass


class DegenerateConfiguration(EgoSceneError, ValueError):
    """Procrustes input is collinear or coincident."""


class InvalidTemplate(EgoSceneError, ValueError):
    pass


class EmptyScene(EgoSceneError, ValueError):
    pass


class NonFiniteEnergy(EgoSceneError, FloatingPointError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InvalidSpec(EgoSceneError, ValueError):
    pass
